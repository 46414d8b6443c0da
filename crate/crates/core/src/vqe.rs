//! Variational eigensolver over a hardware-efficient `U3` + CNOT-chain
//! ansatz, and a Poisson solve phrased as a variational minimization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{sample_counts, Circuit};
use crate::error::{Error, Result};
use crate::gates::Gate;
use crate::rng::{derive_seed, stream_rng};
use crate::state::{log2_exact, StateVector};
use crate::tomography::{pauli_expectation, rotated_probabilities, PauliString};
use crate::C64;

/// Hermiticity tolerance for Hamiltonians.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest register for dense diagonalization and Pauli decomposition.
pub const MAX_DENSE_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HamiltonianRepr", into = "HamiltonianRepr")]
pub enum Hamiltonian {
    Dense(DMatrix<C64>),
    PauliSum(Vec<(f64, PauliString)>),
}

impl Hamiltonian {
    pub fn dense(matrix: DMatrix<C64>) -> Result<Self> {
        log2_exact(matrix.nrows())?;
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if (&matrix - matrix.adjoint()).iter().any(|z| z.norm() > HERMITIAN_TOL) {
            return Err(Error::NotHermitian);
        }
        Ok(Hamiltonian::Dense(matrix))
    }

    pub fn real_symmetric(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::dense(matrix.map(|v| C64::new(v, 0.0)))
    }

    pub fn pauli_sum(terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let Some(n) = terms.first().map(|(_, p)| p.num_qubits()) else {
            return Err(Error::InvalidInput("empty Pauli sum".into()));
        };
        if let Some((_, p)) = terms.iter().find(|(_, p)| p.num_qubits() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.num_qubits(),
            });
        }
        Ok(Hamiltonian::PauliSum(terms))
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            Hamiltonian::Dense(m) => m.nrows().trailing_zeros() as usize,
            Hamiltonian::PauliSum(terms) => terms[0].1.num_qubits(),
        }
    }

    pub fn matrix(&self) -> Result<DMatrix<C64>> {
        crate::state::check_capacity(self.num_qubits(), MAX_DENSE_QUBITS)?;
        Ok(match self {
            Hamiltonian::Dense(m) => m.clone(),
            Hamiltonian::PauliSum(terms) => {
                let dim = 1 << self.num_qubits();
                terms
                    .iter()
                    .fold(DMatrix::zeros(dim, dim), |acc, (c, p)| acc + p.matrix().scale(*c))
            }
        })
    }

    /// Smallest eigenvalue by dense diagonalization.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.matrix()?.symmetric_eigen().eigenvalues.min())
    }

    /// Weighted Pauli strings with `h_P = Tr(P·H)/2^n`, dropping zero weights.
    pub fn pauli_decomposition(&self) -> Result<Vec<(f64, PauliString)>> {
        match self {
            Hamiltonian::PauliSum(terms) => Ok(terms.clone()),
            Hamiltonian::Dense(m) => {
                let n = self.num_qubits();
                crate::state::check_capacity(n, MAX_DENSE_QUBITS)?;
                let dim = m.nrows();
                Ok(PauliString::all(n)
                    .filter_map(|p| {
                        let (x, phase) = p.action();
                        let tr: C64 = (0..dim).map(|i| phase(i) * m[(i, i ^ x)]).sum();
                        let w = tr.re / dim as f64;
                        (w.abs() > 1e-15).then_some((w, p))
                    })
                    .collect())
            }
        }
    }
}

/// `⟨ψ|H|ψ⟩`.
pub fn expectation(h: &Hamiltonian, state: &StateVector) -> Result<f64> {
    if h.num_qubits() != state.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.num_qubits(),
            found: state.num_qubits(),
        });
    }
    match h {
        Hamiltonian::Dense(m) => {
            let v = state.to_column();
            Ok((v.adjoint() * m * &v)[(0, 0)].re)
        }
        Hamiltonian::PauliSum(terms) => terms
            .iter()
            .map(|(c, p)| Ok(c * pauli_expectation(state, p)?))
            .sum(),
    }
}

/// Shot-based estimate of `⟨ψ|H|ψ⟩` from its Pauli decomposition, with
/// `shots` samples per string.
pub fn sampled_expectation(h: &Hamiltonian, state: &StateVector, shots: u64, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be at least 1".into()));
    }
    if h.num_qubits() != state.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.num_qubits(),
            found: state.num_qubits(),
        });
    }
    let n = state.num_qubits();
    let mut total = 0.0;
    for (idx, (c, p)) in h.pauli_decomposition()?.iter().enumerate() {
        if p.is_identity() {
            total += c;
            continue;
        }
        let support: usize = p
            .letters()
            .iter()
            .enumerate()
            .filter(|(_, l)| **l != crate::tomography::Pauli::I)
            .map(|(q, _)| 1 << (n - 1 - q))
            .sum();
        let counts = sample_counts(&rotated_probabilities(state, p), shots, derive_seed(seed, idx as u64));
        let signed: i64 = counts
            .iter()
            .enumerate()
            .map(|(i, &k)| if (i & support).count_ones().is_multiple_of(2) { k as i64 } else { -(k as i64) })
            .sum();
        total += c * signed as f64 / shots as f64;
    }
    Ok(total)
}

/// Layered ansatz: each layer applies `U3(θ, φ, λ)` to every qubit and then
/// CNOTs `(0→1), (1→2), …`. Parameters are ordered layer, qubit, angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ansatz {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub params: Vec<f64>,
}

impl Ansatz {
    pub fn new(num_qubits: usize, num_layers: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(num_qubits, num_layers);
        if params.len() != expected {
            return Err(Error::GateParameters {
                name: "ansatz".into(),
                expected,
                found: params.len(),
            });
        }
        if num_qubits == 0 || num_layers == 0 {
            return Err(Error::InvalidInput("ansatz needs at least one qubit and one layer".into()));
        }
        Ok(Self {
            num_qubits,
            num_layers,
            params,
        })
    }

    pub fn zeros(num_qubits: usize, num_layers: usize) -> Result<Self> {
        Self::new(num_qubits, num_layers, vec![0.0; Self::param_count(num_qubits, num_layers)])
    }

    pub fn param_count(num_qubits: usize, num_layers: usize) -> usize {
        3 * num_qubits * num_layers
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::new(self.num_qubits, self.num_layers, params)
    }

    pub fn circuit(&self) -> Result<Circuit> {
        let n = self.num_qubits;
        let mut circuit = Circuit::new(n, 0);
        for layer in self.params.chunks(3 * n) {
            for (q, k) in layer.chunks(3).enumerate() {
                circuit.push_gate(Gate::u3(k[0], k[1], k[2]), &[q])?;
            }
            for q in 0..n.saturating_sub(1) {
                circuit.cx(q, q + 1)?;
            }
        }
        Ok(circuit)
    }
}

pub fn ansatz_state(a: &Ansatz) -> Result<StateVector> {
    a.circuit()?.run_from_zero()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    /// Convergence threshold on energy improvement over one optimizer sweep.
    pub tolerance: f64,
    /// Optimizer iterations allowed per restart.
    pub max_iterations: usize,
    /// Independent optimizer runs; run 0 starts from the ansatz parameters,
    /// the rest from seeded uniform draws in `[0, 2π)`.
    pub restarts: usize,
    pub seed: u64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Estimate energies from this many shots per Pauli string instead of exactly.
    pub shots: Option<u64>,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 5000,
            restarts: 5,
            seed: 0,
            initial_step: 0.5,
            shots: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub params: Vec<f64>,
    pub energy: f64,
    /// `(iteration, best energy so far)` for the winning restart.
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
    /// Index of the winning restart.
    pub restart: usize,
    /// Objective evaluations across all restarts.
    pub evaluations: usize,
    /// Lowest energy seen at any evaluation of any restart.
    pub min_evaluated_energy: f64,
}

/// Minimize `⟨ψ(k)|H|ψ(k)⟩` with tolerance `ε` and per-restart iteration
/// limit, other settings at their defaults.
pub fn vqe_solve(h: &Hamiltonian, ansatz: &Ansatz, tolerance: f64, max_iterations: usize) -> Result<VqeResult> {
    let config = VqeConfig {
        tolerance,
        max_iterations,
        ..VqeConfig::default()
    };
    vqe_solve_with(h, ansatz, &config)
}

pub fn vqe_solve_with(h: &Hamiltonian, ansatz: &Ansatz, config: &VqeConfig) -> Result<VqeResult> {
    if h.num_qubits() != ansatz.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: h.num_qubits(),
            found: ansatz.num_qubits,
        });
    }
    if !(config.tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let runs: Vec<Result<(Outcome, usize)>> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let x0 = if r == 0 {
                ansatz.params.clone()
            } else {
                let mut rng = stream_rng(config.seed, r as u64);
                (0..ansatz.params.len()).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
            };
            let mut evals = 0u64;
            let mut failure = None;
            let objective = |k: &[f64]| {
                evals += 1;
                let energy = ansatz
                    .with_params(k.to_vec())
                    .and_then(|a| ansatz_state(&a))
                    .and_then(|s| match config.shots {
                        None => expectation(h, &s),
                        Some(shots) => {
                            let seed = derive_seed(derive_seed(config.seed, r as u64), evals);
                            sampled_expectation(h, &s, shots, seed)
                        }
                    });
                energy.unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    f64::INFINITY
                })
            };
            let outcome = nelder_mead(objective, x0, config.initial_step, config.tolerance, config.max_iterations);
            match failure {
                Some(e) => Err(e),
                None => Ok((outcome, r)),
            }
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let evaluations = runs.iter().map(|(o, _)| o.evaluations).sum();
    let min_evaluated_energy = runs.iter().map(|(o, _)| o.min_value).fold(f64::INFINITY, f64::min);
    let (best, restart) = runs
        .into_iter()
        .min_by(|(a, ra), (b, rb)| a.value.total_cmp(&b.value).then(ra.cmp(rb)))
        .expect("at least one restart");
    Ok(VqeResult {
        params: best.point,
        energy: best.value,
        trace: best.trace,
        converged: best.converged,
        restart,
        evaluations,
        min_evaluated_energy,
    })
}

#[derive(Debug, Clone)]
struct Outcome {
    point: Vec<f64>,
    value: f64,
    trace: Vec<(usize, f64)>,
    converged: bool,
    evaluations: usize,
    min_value: f64,
}

/// Nelder–Mead simplex search. A run stops when, over the last `d + 1`
/// iterations, the best value improved by less than `tol` and the simplex
/// values span less than `tol`. The simplex is then rebuilt around the best
/// point once more; the run ends when a rebuilt simplex also fails to improve
/// by `tol`.
fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: Vec<f64>, step: f64, tol: f64, max_iter: usize) -> Outcome {
    let d = x0.len();
    let mut evaluations = 0usize;
    let mut min_value = f64::INFINITY;
    let mut eval = |x: &[f64], evaluations: &mut usize, min_value: &mut f64| {
        *evaluations += 1;
        let v = f(x);
        *min_value = min_value.min(v);
        v
    };
    let build = |center: &[f64], evaluations: &mut usize, min_value: &mut f64, eval: &mut dyn FnMut(&[f64], &mut usize, &mut f64) -> f64| {
        let mut simplex = vec![(center.to_vec(), eval(center, evaluations, min_value))];
        for i in 0..d {
            let mut p = center.to_vec();
            p[i] += step;
            let v = eval(&p, evaluations, min_value);
            simplex.push((p, v));
        }
        simplex
    };

    let mut simplex = build(&x0, &mut evaluations, &mut min_value, &mut eval);
    let mut trace = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut last_rebuild_value: Option<f64> = None;
    let sweep = d + 1;

    for iter in 1..=max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        trace.push((iter, best));
        history.push(best);
        let spread = simplex[d].1 - best;
        let stalled = history.len() > sweep && history[history.len() - 1 - sweep] - best < tol;
        if d == 0 || (stalled && spread < tol) {
            match last_rebuild_value {
                Some(v) if v - best < tol => {
                    converged = true;
                    break;
                }
                _ => {
                    last_rebuild_value = Some(best);
                    let center = simplex[0].0.clone();
                    simplex = build(&center, &mut evaluations, &mut min_value, &mut eval);
                    history.clear();
                    continue;
                }
            }
        }

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(p, _)| p[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evaluations, &mut min_value);
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evaluations, &mut min_value);
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst.1 {
                let p = along(0.5);
                let v = eval(&p, &mut evaluations, &mut min_value);
                (p, v)
            } else {
                let p = along(-0.5);
                let v = eval(&p, &mut evaluations, &mut min_value);
                (p, v)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = anchor.iter().zip(&entry.0).map(|(a, x)| a + 0.5 * (x - a)).collect();
                    let v = eval(&p, &mut evaluations, &mut min_value);
                    *entry = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Outcome {
        point,
        value,
        trace,
        converged,
        evaluations,
        min_value,
    }
}

/// Second-difference operator for `−u''` with homogeneous Dirichlet
/// boundaries and a unit right-hand side (a constant pressure gradient
/// driving the flow, `−(1/μ)·dp/dx = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSystem {
    /// `tridiag(−1, 2, −1)/h²`.
    pub matrix: DMatrix<f64>,
    pub rhs: Vec<f64>,
    pub spacing: f64,
}

impl PoissonSystem {
    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        Hamiltonian::real_symmetric(&self.matrix)
    }
}

pub fn build_poisson_operator(grid_points: usize, spacing: f64) -> Result<PoissonSystem> {
    log2_exact(grid_points)?;
    if !(spacing > 0.0) {
        return Err(Error::InvalidInput("spacing must be positive".into()));
    }
    let scale = 1.0 / (spacing * spacing);
    let matrix = DMatrix::from_fn(grid_points, grid_points, |i, j| match i.abs_diff(j) {
        0 => 2.0 * scale,
        1 => -scale,
        _ => 0.0,
    });
    Ok(PoissonSystem {
        matrix,
        rhs: vec![1.0; grid_points],
        spacing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesConfig {
    pub layers: usize,
    pub vqe: VqeConfig,
}

impl Default for StokesConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            vqe: VqeConfig {
                tolerance: 1e-12,
                max_iterations: 20_000,
                ..VqeConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesReport {
    pub solution: Vec<f64>,
    /// `‖Ax − b‖ / ‖b‖` (0 when `b = 0`).
    pub relative_residual: f64,
    /// Amplitude scale `s` with `x = Re(s·ψ)`.
    pub scale: [f64; 2],
    pub converged: bool,
    pub params: Vec<f64>,
}

/// Solve `A x = b` by minimizing `‖A·s·ψ(k) − b‖²` over ansatz states `ψ(k)`
/// and a complex scale `s`. For fixed `ψ` the optimal scale is
/// `s = ⟨ψ|Aᵀb⟩ / ⟨ψ|AᵀA|ψ⟩`, which leaves the objective
/// `‖b‖² − |⟨ψ|Aᵀb⟩|² / ⟨ψ|AᵀA|ψ⟩` to be minimized over `k`.
pub fn solve_stokes_vqe(matrix: &DMatrix<f64>, rhs: &[f64], config: &StokesConfig) -> Result<StokesReport> {
    let m = rhs.len();
    let n = log2_exact(m)?;
    if matrix.nrows() != m || matrix.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: matrix.nrows(),
        });
    }
    let b = DVector::from_column_slice(rhs);
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(StokesReport {
            solution: vec![0.0; m],
            relative_residual: 0.0,
            scale: [0.0, 0.0],
            converged: true,
            params: vec![0.0; Ansatz::param_count(n, config.layers)],
        });
    }
    let a = matrix.map(|v| C64::new(v, 0.0));
    let normal = a.adjoint() * &a;
    let c = a.adjoint() * b.map(|v| C64::new(v, 0.0));
    let b2 = b_norm * b_norm;

    let optimal_scale = |psi: &DVector<C64>| {
        let num = (psi.adjoint() * &c)[(0, 0)];
        let den = (psi.adjoint() * &normal * psi)[(0, 0)].re;
        (num, den)
    };
    let ansatz = Ansatz::zeros(n, config.layers)?;
    let objective = |k: &[f64]| -> f64 {
        let Ok(state) = ansatz.with_params(k.to_vec()).and_then(|a| ansatz_state(&a)) else {
            return f64::INFINITY;
        };
        let psi = state.to_column();
        let (num, den) = optimal_scale(&psi);
        if den <= 0.0 {
            return 1.0;
        }
        (b2 - num.norm_sqr() / den) / b2
    };

    let cfg = &config.vqe;
    let runs: Vec<(Outcome, usize)> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let dim = ansatz.params.len();
            let x0 = if r == 0 {
                // Small rotations keep the starting state close to |0…0⟩ but
                // break the symmetry of the all-zero point.
                (0..dim).map(|i| if i % 3 == 0 { 0.1 } else { 0.0 }).collect()
            } else {
                let mut rng = stream_rng(cfg.seed, r as u64);
                (0..dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
            };
            (nelder_mead(objective, x0, cfg.initial_step, cfg.tolerance, cfg.max_iterations), r)
        })
        .collect();
    let (best, _) = runs
        .into_iter()
        .min_by(|(a, ra), (b, rb)| a.value.total_cmp(&b.value).then(ra.cmp(rb)))
        .expect("at least one restart");

    let psi = ansatz_state(&ansatz.with_params(best.point.clone())?)?.to_column();
    let (num, den) = optimal_scale(&psi);
    let s = if den > 0.0 { num / den } else { C64::new(0.0, 0.0) };
    let solution: Vec<f64> = psi.iter().map(|p| (s * p).re).collect();
    let x = DVector::from_column_slice(&solution);
    let relative_residual = (matrix * x - &b).norm() / b_norm;
    Ok(StokesReport {
        solution,
        relative_residual,
        scale: [s.re, s.im],
        converged: best.converged,
        params: best.point,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum HamiltonianRepr {
    Pauli { pauli_terms: Vec<PauliTermRepr> },
    Dense { matrix: Vec<Vec<[f64; 2]>> },
}

#[derive(Serialize, Deserialize)]
struct PauliTermRepr {
    coefficient: f64,
    pauli: String,
}

impl TryFrom<HamiltonianRepr> for Hamiltonian {
    type Error = Error;

    fn try_from(repr: HamiltonianRepr) -> Result<Self> {
        match repr {
            HamiltonianRepr::Pauli { pauli_terms } => Hamiltonian::pauli_sum(
                pauli_terms
                    .into_iter()
                    .map(|t| Ok((t.coefficient, t.pauli.parse()?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            HamiltonianRepr::Dense { matrix } => {
                let rows = matrix.len();
                if matrix.iter().any(|r| r.len() != rows) {
                    return Err(Error::InvalidInput("Hamiltonian matrix is not square".into()));
                }
                Hamiltonian::dense(DMatrix::from_fn(rows, rows, |i, j| C64::new(matrix[i][j][0], matrix[i][j][1])))
            }
        }
    }
}

impl From<Hamiltonian> for HamiltonianRepr {
    fn from(h: Hamiltonian) -> Self {
        match h {
            Hamiltonian::PauliSum(terms) => HamiltonianRepr::Pauli {
                pauli_terms: terms
                    .into_iter()
                    .map(|(coefficient, p)| PauliTermRepr {
                        coefficient,
                        pauli: p.to_string(),
                    })
                    .collect(),
            },
            Hamiltonian::Dense(m) => HamiltonianRepr::Dense {
                matrix: (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                    .collect(),
            },
        }
    }
}
