//! One-dimensional quantum lattice-gas automaton in the single-particle sector.
//!
//! Each site carries a left-mover and a right-mover amplitude. A time step
//! applies the site-local scattering matrix to every `(ψ_left, ψ_right)` pair
//! and then advects: right movers shift one site right, left movers one site
//! left, with periodic wrap.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{ANALYTIC_TOL, C64};

/// Tolerance on `|θ| = 1`.
pub const THETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringParams {
    /// Scattering angle in radians.
    pub p: f64,
    /// Unit-modulus phase of the doubly occupied two-particle state.
    pub theta: C64,
}

impl ScatteringParams {
    pub fn new(p: f64, theta: C64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("scattering angle {p} is not finite")));
        }
        if (theta.norm() - 1.0).abs() > THETA_TOL {
            return Err(Error::InvalidInput(format!("|theta| = {} is not 1", theta.norm())));
        }
        Ok(Self { p, theta })
    }

    /// Single-particle parameters (`θ = 1`).
    pub fn with_angle(p: f64) -> Self {
        Self {
            p,
            theta: C64::new(1.0, 0.0),
        }
    }

    /// `(L, R) = (cos p, i sin p)`.
    pub fn coefficients(&self) -> (C64, C64) {
        (C64::new(self.p.cos(), 0.0), C64::new(0.0, self.p.sin()))
    }
}

/// `[[cos p, i sin p], [i sin p, cos p]]`, acting on `(ψ_left, ψ_right)`.
pub fn scattering_matrix_1(params: &ScatteringParams) -> DMatrix<C64> {
    let (l, r) = params.coefficients();
    DMatrix::from_row_slice(2, 2, &[l, r, r, l])
}

/// Two-channel scattering on the occupation basis `|00⟩, |01⟩, |10⟩, |11⟩`:
/// empty and doubly occupied sites pick up `1` and `θ`, the singly occupied
/// block is the one-particle matrix.
pub fn scattering_matrix_2(params: &ScatteringParams) -> Result<DMatrix<C64>> {
    if (params.theta.norm() - 1.0).abs() > THETA_TOL {
        return Err(Error::InvalidInput(format!("|theta| = {} is not 1", params.theta.norm())));
    }
    let (l, r) = params.coefficients();
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = l;
    m[(1, 2)] = r;
    m[(2, 1)] = r;
    m[(2, 2)] = l;
    m[(3, 3)] = params.theta;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mover {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice1D {
    left: Vec<C64>,
    right: Vec<C64>,
    /// Lattice spacing `d`.
    pub spacing: f64,
    /// Duration `Δt` of one step.
    pub time_step: f64,
}

impl Lattice1D {
    /// Build from per-site channel amplitudes; total norm must be 1 within `1e-10`.
    pub fn from_channels(left: Vec<C64>, right: Vec<C64>, spacing: f64, time_step: f64) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                expected: left.len(),
                found: right.len(),
            });
        }
        if left.is_empty() {
            return Err(Error::InvalidInput("lattice needs at least one site".into()));
        }
        if !(spacing > 0.0 && time_step > 0.0) {
            return Err(Error::InvalidInput("spacing and time step must be positive".into()));
        }
        let lattice = Self {
            left,
            right,
            spacing,
            time_step,
        };
        let norm = lattice.norm_sqr();
        if (norm - 1.0).abs() > ANALYTIC_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(lattice)
    }

    /// One particle at `site` moving in direction `mover`, with unit spacing and step.
    pub fn single_mover(num_sites: usize, site: usize, mover: Mover) -> Result<Self> {
        if site >= num_sites {
            return Err(Error::InvalidInput(format!("site {site} outside {num_sites}-site lattice")));
        }
        let mut left = vec![C64::new(0.0, 0.0); num_sites];
        let mut right = left.clone();
        match mover {
            Mover::Left => left[site] = C64::new(1.0, 0.0),
            Mover::Right => right[site] = C64::new(1.0, 0.0),
        }
        Self::from_channels(left, right, 1.0, 1.0)
    }

    /// Gaussian packet on the periodic domain `[0, N·spacing)` whose density
    /// has standard deviation `packet.width`. A fraction `right_fraction` of
    /// the probability is placed in the right-moving channel, in phase with
    /// the left-moving part.
    pub fn gaussian(
        num_sites: usize,
        packet: &GaussianPacket,
        right_fraction: f64,
        spacing: f64,
        time_step: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&right_fraction) {
            return Err(Error::InvalidInput(format!("right fraction {right_fraction} outside [0, 1]")));
        }
        let length = num_sites as f64 * spacing;
        let g: Vec<f64> = (0..num_sites)
            .map(|j| packet.amplitude(j as f64 * spacing, length))
            .collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidInput("packet vanishes on the lattice".into()));
        }
        let (wl, wr) = ((1.0 - right_fraction).sqrt() / norm, right_fraction.sqrt() / norm);
        let left = g.iter().map(|v| C64::new(v * wl, 0.0)).collect();
        let right = g.iter().map(|v| C64::new(v * wr, 0.0)).collect();
        Self::from_channels(left, right, spacing, time_step)
    }

    pub fn num_sites(&self) -> usize {
        self.left.len()
    }

    pub fn left(&self) -> &[C64] {
        &self.left
    }

    pub fn right(&self) -> &[C64] {
        &self.right
    }

    pub fn norm_sqr(&self) -> f64 {
        self.left.iter().chain(&self.right).map(|a| a.norm_sqr()).sum()
    }

    /// Amplitudes flattened as `[ψ_left(0), ψ_right(0), ψ_left(1), …]`.
    pub fn flatten(&self) -> Vec<C64> {
        self.left
            .iter()
            .zip(&self.right)
            .flat_map(|(l, r)| [*l, *r])
            .collect()
    }
}

fn scatter(lattice: &Lattice1D, params: &ScatteringParams) -> (Vec<C64>, Vec<C64>) {
    let (l, r) = params.coefficients();
    lattice
        .left
        .iter()
        .zip(&lattice.right)
        .map(|(&a, &b)| (l * a + r * b, r * a + l * b))
        .unzip()
}

/// One scatter-then-advect step.
pub fn step(lattice: &Lattice1D, params: &ScatteringParams) -> Lattice1D {
    let (mut left, mut right) = scatter(lattice, params);
    left.rotate_left(1);
    right.rotate_right(1);
    Lattice1D {
        left,
        right,
        ..*lattice
    }
}

/// `num_steps` successive steps.
pub fn evolve(lattice: &Lattice1D, params: &ScatteringParams, num_steps: usize) -> Lattice1D {
    (0..num_steps).fold(lattice.clone(), |acc, _| step(&acc, params))
}

/// Per-site field of real observables.
pub type ObservableField = Vec<f64>;

/// `P_R = |ψ_left(R)|² + |ψ_right(R)|²`.
pub fn occupancy(lattice: &Lattice1D) -> ObservableField {
    lattice
        .left
        .iter()
        .zip(&lattice.right)
        .map(|(l, r)| l.norm_sqr() + r.norm_sqr())
        .collect()
}

/// Mass density `m·P_R/d` and momentum density `m·v·(|ψ_right|² − |ψ_left|²)/d`.
pub fn mass_momentum(lattice: &Lattice1D, mass: f64, speed: f64) -> Result<(ObservableField, ObservableField)> {
    if !(mass > 0.0 && speed > 0.0) {
        return Err(Error::InvalidInput("mass and speed must be positive".into()));
    }
    let d = lattice.spacing;
    let (density, momentum) = lattice
        .left
        .iter()
        .zip(&lattice.right)
        .map(|(l, r)| {
            let (pl, pr) = (l.norm_sqr(), r.norm_sqr());
            (mass * (pl + pr) / d, mass * speed * (pr - pl) / d)
        })
        .unzip();
    Ok((density, momentum))
}

/// Residual of the per-site transport balance
/// `P_{R+v,t+Δt} = P_{R,t} + ⟨Ψ|Ŝ†n̂_R Ŝ − n̂_R|Ψ⟩`, evaluated for each mover
/// channel with `v` its velocity (`±1` site). Returns the larger magnitude of
/// the two channels at every site.
pub fn transport_residual(lattice: &Lattice1D, params: &ScatteringParams) -> ObservableField {
    transport_residual_with(lattice, params, step)
}

fn transport_residual_with(
    lattice: &Lattice1D,
    params: &ScatteringParams,
    stepper: impl Fn(&Lattice1D, &ScatteringParams) -> Lattice1D,
) -> ObservableField {
    let n = lattice.num_sites();
    let next = stepper(lattice, params);
    let (sl, sr) = scatter(lattice, params);
    (0..n)
        .map(|site| {
            let left = next.left[(site + n - 1) % n].norm_sqr()
                - lattice.left[site].norm_sqr()
                - (sl[site].norm_sqr() - lattice.left[site].norm_sqr());
            let right = next.right[(site + 1) % n].norm_sqr()
                - lattice.right[site].norm_sqr()
                - (sr[site].norm_sqr() - lattice.right[site].norm_sqr());
            left.abs().max(right.abs())
        })
        .collect()
}

/// Gaussian profile on a periodic domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub center: f64,
    /// Standard deviation of the density `|ψ|²`.
    pub width: f64,
}

impl GaussianPacket {
    /// Unnormalized amplitude `exp(−δ²/(4σ²))` with `δ` the periodic distance to the center.
    pub fn amplitude(&self, x: f64, length: f64) -> f64 {
        let delta = periodic_offset(x - self.center, length);
        (-delta * delta / (4.0 * self.width * self.width)).exp()
    }
}

fn periodic_offset(delta: f64, length: f64) -> f64 {
    delta - length * (delta / length).round()
}

/// Which continuum limit the lattice is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContinuumRegime {
    /// `i∂ψ/∂t = −D ∂²ψ/∂x²`. The lattice starts with equal left and right
    /// amplitudes and runs with `Δt = d²·D_lat/D`, where `D_lat = 1/(2 tan p)`
    /// is the curvature of the dispersion `cos ω = cos p · cos k` at `k = 0`.
    Schrodinger { diffusivity: f64 },
    /// Free streaming at unit speed: all probability in the right movers,
    /// `Δt = d`, reference is the rigidly translated initial density.
    Streaming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumReport {
    pub num_sites: usize,
    pub num_steps: usize,
    pub time_step: f64,
    pub physical_time: f64,
    /// `‖P/d − ρ_ref‖₂` over the unit domain.
    pub l2_error: f64,
    /// `‖ρ_ref‖₂`, for scale.
    pub reference_l2_norm: f64,
}

/// Effective lattice dispersion coefficient `1/(2 tan p)`.
pub fn lattice_diffusivity(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < FRAC_PI_2) {
        return Err(Error::InvalidInput(format!("scattering angle {p} must lie in (0, π/2)")));
    }
    Ok(1.0 / (2.0 * p.tan()))
}

/// Step duration for `regime` on a unit domain of `num_sites` sites.
pub fn continuum_time_step(num_sites: usize, params: &ScatteringParams, regime: ContinuumRegime) -> Result<f64> {
    let d = 1.0 / num_sites as f64;
    match regime {
        ContinuumRegime::Schrodinger { diffusivity } => {
            if !(diffusivity > 0.0) {
                return Err(Error::InvalidInput("diffusivity must be positive".into()));
            }
            Ok(d * d * lattice_diffusivity(params.p)? / diffusivity)
        }
        ContinuumRegime::Streaming => Ok(d),
    }
}

/// Reference grid points per unit length for the finite-difference solver.
pub const REFERENCE_POINTS: usize = 4096;

/// Evolve a Gaussian packet on a unit periodic domain for `num_steps` and
/// compare the occupancy density with the continuum reference at the same
/// physical time.
pub fn continuum_compare(
    packet: &GaussianPacket,
    num_sites: usize,
    params: &ScatteringParams,
    num_steps: usize,
    regime: ContinuumRegime,
) -> Result<ContinuumReport> {
    if num_sites < 2 {
        return Err(Error::InvalidInput("need at least two sites".into()));
    }
    let d = 1.0 / num_sites as f64;
    let dt = continuum_time_step(num_sites, params, regime)?;
    let right_fraction = match regime {
        ContinuumRegime::Schrodinger { .. } => 0.5,
        ContinuumRegime::Streaming => 1.0,
    };
    let initial = Lattice1D::gaussian(num_sites, packet, right_fraction, d, dt)?;
    let lattice_density: Vec<f64> = occupancy(&evolve(&initial, params, num_steps))
        .into_iter()
        .map(|p| p / d)
        .collect();
    let time = num_steps as f64 * dt;

    let reference: Vec<f64> = match regime {
        ContinuumRegime::Schrodinger { diffusivity } => {
            let per_site = REFERENCE_POINTS.div_ceil(num_sites);
            let fine = schrodinger_reference(packet, num_sites * per_site, diffusivity, time);
            (0..num_sites).map(|j| fine[j * per_site]).collect()
        }
        ContinuumRegime::Streaming => {
            let norm = gaussian_density_norm(packet);
            (0..num_sites)
                .map(|j| packet.amplitude(j as f64 * d - time, 1.0).powi(2) / norm)
                .collect()
        }
    };
    let l2 = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() * d).sqrt();
    Ok(ContinuumReport {
        num_sites,
        num_steps,
        time_step: dt,
        physical_time: time,
        l2_error: l2(&mut lattice_density.iter().zip(&reference).map(|(a, b)| a - b)),
        reference_l2_norm: l2(&mut reference.iter().copied()),
    })
}

/// `∫ exp(−δ²/(2σ²)) dx` over the unit periodic domain.
fn gaussian_density_norm(packet: &GaussianPacket) -> f64 {
    let m = REFERENCE_POINTS;
    (0..m)
        .map(|j| packet.amplitude(j as f64 / m as f64, 1.0).powi(2))
        .sum::<f64>()
        / m as f64
}

/// Crank–Nicolson solution of `i∂ψ/∂t = −D ∂²ψ/∂x²` on `points` periodic
/// grid points over `[0, 1)`, returning `|ψ|²` normalized to unit integral.
pub fn schrodinger_reference(packet: &GaussianPacket, points: usize, diffusivity: f64, time: f64) -> Vec<f64> {
    let h = 1.0 / points as f64;
    let mut psi: Vec<C64> = (0..points)
        .map(|j| C64::new(packet.amplitude(j as f64 * h, 1.0), 0.0))
        .collect();
    let norm = (psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * h).sqrt();
    psi.iter_mut().for_each(|a| *a /= norm);

    if time > 0.0 {
        // Enough steps that the phase advance per step at wavenumber 1/σ is at most 1e-3.
        let steps = (1000.0 * diffusivity * time / (packet.width * packet.width)).ceil().max(1.0) as usize;
        let dt = time / steps as f64;
        let r = C64::new(0.0, diffusivity * dt / (2.0 * h * h));
        let diag = C64::new(1.0, 0.0) + r * 2.0;
        for _ in 0..steps {
            let rhs: Vec<C64> = (0..points)
                .map(|j| {
                    let lap = psi[(j + points - 1) % points] - psi[j] * 2.0 + psi[(j + 1) % points];
                    psi[j] + r * lap
                })
                .collect();
            psi = solve_cyclic_tridiagonal(-r, diag, -r, &rhs);
        }
    }
    psi.iter().map(|a| a.norm_sqr()).collect()
}

/// Solve the periodic system `lower·x[j−1] + diag·x[j] + upper·x[j+1] = rhs[j]`
/// by the Thomas algorithm with a Sherman–Morrison correction for the corners.
fn solve_cyclic_tridiagonal(lower: C64, diag: C64, upper: C64, rhs: &[C64]) -> Vec<C64> {
    let n = rhs.len();
    let gamma = -diag;
    let mut b = vec![diag; n];
    b[0] = diag - gamma;
    b[n - 1] = diag - lower * upper / gamma;
    let x = solve_tridiagonal(lower, &b, upper, rhs);
    let mut u = vec![C64::new(0.0, 0.0); n];
    u[0] = gamma;
    u[n - 1] = upper;
    let z = solve_tridiagonal(lower, &b, upper, &u);
    let factor = (x[0] + lower * x[n - 1] / gamma) / (C64::new(1.0, 0.0) + z[0] + lower * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

fn solve_tridiagonal(lower: C64, diag: &[C64], upper: C64, rhs: &[C64]) -> Vec<C64> {
    let n = rhs.len();
    let mut c_prime = vec![C64::new(0.0, 0.0); n];
    let mut d_prime = vec![C64::new(0.0, 0.0); n];
    c_prime[0] = upper / diag[0];
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower * c_prime[i - 1];
        c_prime[i] = upper / m;
        d_prime[i] = (rhs[i] - lower * d_prime[i - 1]) / m;
    }
    let mut x = d_prime;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_prime[i] * next;
    }
    x
}
