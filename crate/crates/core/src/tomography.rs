//! Pauli expectations, POVM statistics and linear-inversion state tomography.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::circuit::{sample_counts, Circuit};
use crate::error::{Error, Result};
use crate::gates::{apply_unchecked, Gate};
use crate::rng::derive_seed;
use crate::state::{DensityMatrix, StateVector};
use crate::{ANALYTIC_TOL, C64};

/// Largest register reconstructed without `force`.
pub const MAX_TOMOGRAPHY_QUBITS: usize = 3;
/// Smallest accepted shot count per measurement basis.
pub const MIN_SHOTS_PER_BASIS: u64 = 100;
/// Eigenvalue slack allowed when validating POVM positivity.
pub const POVM_PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> DMatrix<C64> {
        let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        let v = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        DMatrix::from_row_slice(2, 2, &v)
    }
}

/// Tensor product of single-qubit Paulis, letter `k` acting on qubit `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self(letters)
    }

    pub fn identity(num_qubits: usize) -> Self {
        Self(vec![Pauli::I; num_qubits])
    }

    /// The `index`-th string in base-4 order (`I, X, Y, Z` per digit, qubit 0 most significant).
    pub fn from_index(num_qubits: usize, index: usize) -> Self {
        Self(
            (0..num_qubits)
                .map(|q| Pauli::ALL[index >> (2 * (num_qubits - 1 - q)) & 3])
                .collect(),
        )
    }

    /// All `4^n` strings in [`PauliString::from_index`] order.
    pub fn all(num_qubits: usize) -> impl Iterator<Item = PauliString> {
        (0..1usize << (2 * num_qubits)).map(move |k| Self::from_index(num_qubits, k))
    }

    pub fn num_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// `(x_mask, z_mask, y_count)`: bit flips, sign-bearing qubits, and number of `Y` factors.
    fn masks(&self) -> (usize, usize, usize) {
        let n = self.0.len();
        let mut x = 0;
        let mut z = 0;
        let mut y = 0;
        for (q, p) in self.0.iter().enumerate() {
            let bit = 1 << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    y += 1;
                }
                Pauli::Z => z |= bit,
            }
        }
        (x, z, y)
    }

    /// `P|i⟩ = phase(i)·|i ⊕ x_mask⟩`.
    pub(crate) fn action(&self) -> (usize, impl Fn(usize) -> C64) {
        let (x, z, y) = self.masks();
        let base = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, -1.0),
        ][y % 4];
        (x, move |i: usize| if (i & z).count_ones().is_multiple_of(2) { base } else { -base })
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        let dim = 1 << self.0.len();
        let (x, phase) = self.action();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i ^ x, i)] = phase(i);
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p:?}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidInput(format!("unknown Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

/// `⟨ψ|P|ψ⟩`.
pub fn pauli_expectation(state: &StateVector, p: &PauliString) -> Result<f64> {
    if state.num_qubits() != p.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.num_qubits(),
            found: p.num_qubits(),
        });
    }
    let amps = state.amplitudes();
    let (x, phase) = p.action();
    let value: C64 = amps
        .iter()
        .enumerate()
        .map(|(i, a)| amps[i ^ x].conj() * phase(i) * a)
        .sum();
    Ok(value.re)
}

/// A validated set of POVM elements.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    elements: Vec<DMatrix<C64>>,
}

impl PovmSet {
    /// Elements must be Hermitian, positive semidefinite and sum to the identity.
    pub fn new(elements: Vec<DMatrix<C64>>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidPovm("no elements".into()));
        };
        let dim = first.nrows();
        let mut total = DMatrix::<C64>::zeros(dim, dim);
        for (k, e) in elements.iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::InvalidPovm(format!("element {k} is not {dim}x{dim}")));
            }
            if (e - e.adjoint()).iter().any(|z| z.norm() > ANALYTIC_TOL) {
                return Err(Error::InvalidPovm(format!("element {k} is not Hermitian")));
            }
            let min = e.clone().symmetric_eigen().eigenvalues.min();
            if min < -POVM_PSD_TOL {
                return Err(Error::InvalidPovm(format!("element {k} has eigenvalue {min}")));
            }
            total += e;
        }
        let deviation = (total - DMatrix::<C64>::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if deviation > ANALYTIC_TOL {
            return Err(Error::InvalidPovm(format!("elements sum to identity only within {deviation}")));
        }
        Ok(Self { elements })
    }

    /// Projective measurement in the computational basis.
    pub fn computational(num_qubits: usize) -> Self {
        let dim = 1 << num_qubits;
        let elements = (0..dim)
            .map(|k| {
                let mut m = DMatrix::zeros(dim, dim);
                m[(k, k)] = C64::new(1.0, 0.0);
                m
            })
            .collect();
        Self { elements }
    }

    pub fn elements(&self) -> &[DMatrix<C64>] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }
}

/// Outcome probabilities `Tr(E_a ρ)`.
pub fn povm_probabilities(rho: &DensityMatrix, povm: &PovmSet) -> Result<Vec<f64>> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: povm.dim(),
        });
    }
    Ok(povm
        .elements
        .iter()
        .map(|e| (e * rho.matrix()).trace().re.max(0.0))
        .collect())
}

/// Probability below which an outcome is treated as impossible.
pub const MIN_OUTCOME_PROBABILITY: f64 = 1e-12;

/// State after observing the outcome with measurement operator `a`:
/// `A ρ A† / Tr(A ρ A†)`.
pub fn post_measurement_state(rho: &DensityMatrix, a: &DMatrix<C64>) -> Result<DensityMatrix> {
    if a.nrows() != rho.dim() || a.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: a.nrows(),
        });
    }
    let unnormalized = a * rho.matrix() * a.adjoint();
    let p = unnormalized.trace().re;
    if p <= MIN_OUTCOME_PROBABILITY {
        return Err(Error::ZeroProbability(p));
    }
    let m = unnormalized.unscale(p);
    let hermitian = (&m + m.adjoint()).unscale(2.0);
    Ok(DensityMatrix::from_matrix_unchecked(hermitian))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyConfig {
    pub shots_per_basis: u64,
    pub seed: u64,
    /// Project the estimate onto the physical set by clipping negative eigenvalues.
    pub clip: bool,
    /// Allow registers above [`MAX_TOMOGRAPHY_QUBITS`].
    pub force: bool,
}

impl TomographyConfig {
    pub fn new(shots_per_basis: u64, seed: u64) -> Self {
        Self {
            shots_per_basis,
            seed,
            clip: false,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    /// Standard error of each entry of `rho` (before any clipping).
    pub stderr: DMatrix<f64>,
    /// Estimated `⟨P⟩` for every string in [`PauliString::all`] order.
    pub expectations: Vec<f64>,
    /// Standard error of each estimated expectation.
    pub expectation_stderr: Vec<f64>,
}

impl Reconstruction {
    pub const METHOD: &'static str = "linear_inversion";
}

/// Reconstruct the state prepared by `circuit` from `|0…0⟩` with
/// `shots_per_basis` samples for every non-identity Pauli string.
pub fn reconstruct_density(circuit: &Circuit, shots_per_basis: u64, seed: u64) -> Result<Reconstruction> {
    reconstruct_density_with(circuit, &TomographyConfig::new(shots_per_basis, seed))
}

pub fn reconstruct_density_with(circuit: &Circuit, config: &TomographyConfig) -> Result<Reconstruction> {
    let n = circuit.num_qubits();
    if n > MAX_TOMOGRAPHY_QUBITS && !config.force {
        return Err(Error::InvalidInput(format!(
            "tomography on {n} qubits needs 4^{n} bases; pass force to proceed"
        )));
    }
    if config.shots_per_basis < MIN_SHOTS_PER_BASIS {
        return Err(Error::InvalidInput(format!(
            "shots_per_basis must be at least {MIN_SHOTS_PER_BASIS}"
        )));
    }
    let state = circuit.run_from_zero()?;
    let shots = config.shots_per_basis;
    let estimates: Vec<(f64, f64)> = (0..1usize << (2 * n))
        .into_par_iter()
        .map(|b| {
            if b == 0 {
                return (1.0, 0.0);
            }
            let p = PauliString::from_index(n, b);
            let probs = rotated_probabilities(&state, &p);
            let counts = sample_counts(&probs, shots, derive_seed(config.seed, b as u64));
            let m = parity_mean(&p, &counts, shots);
            (m, ((1.0 - m * m).max(0.0) / shots as f64).sqrt())
        })
        .collect();
    let (expectations, expectation_stderr): (Vec<f64>, Vec<f64>) = estimates.into_iter().unzip();

    let dim = 1usize << n;
    let mut variance = DMatrix::<f64>::zeros(dim, dim);
    for (b, s) in expectation_stderr.iter().enumerate() {
        let (x, _) = PauliString::from_index(n, b).action();
        for i in 0..dim {
            variance[(i ^ x, i)] += s * s;
        }
    }
    let stderr = variance.map(|v| v.sqrt() / dim as f64);

    let mut rho = density_from_expectations(n, &expectations)?;
    if config.clip {
        rho = rho.clipped_to_physical();
    }
    Ok(Reconstruction {
        rho,
        stderr,
        expectations,
        expectation_stderr,
    })
}

/// Computational-basis probabilities after rotating each qubit into the
/// eigenbasis of its Pauli letter (`H` for `X`, `S†` then `H` for `Y`).
pub fn rotated_probabilities(state: &StateVector, p: &PauliString) -> Vec<f64> {
    let n = state.num_qubits();
    let mut rotated = state.clone();
    let (h, sdg) = (Gate::h(), Gate::sdg());
    for (q, letter) in p.letters().iter().enumerate() {
        match letter {
            Pauli::X => apply_unchecked(rotated.amplitudes_mut(), n, &h, &[], &[q]),
            Pauli::Y => {
                apply_unchecked(rotated.amplitudes_mut(), n, &sdg, &[], &[q]);
                apply_unchecked(rotated.amplitudes_mut(), n, &h, &[], &[q]);
            }
            Pauli::I | Pauli::Z => {}
        }
    }
    rotated.probabilities()
}

/// Mean of the product of `±1` outcomes over the string's support.
fn parity_mean(p: &PauliString, counts: &[u64], shots: u64) -> f64 {
    let (x, z, _) = p.masks();
    let support = x | z;
    let signed: i64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| if (i & support).count_ones() % 2 == 0 { c as i64 } else { -(c as i64) })
        .sum();
    signed as f64 / shots as f64
}

/// `ρ = 2^{-n} Σ_P ⟨P⟩ P`, with the identity coefficient fixed at 1 so the
/// trace is exactly 1.
pub fn density_from_expectations(num_qubits: usize, expectations: &[f64]) -> Result<DensityMatrix> {
    let count = 1usize << (2 * num_qubits);
    if expectations.len() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            found: expectations.len(),
        });
    }
    let dim = 1usize << num_qubits;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for (b, &e) in expectations.iter().enumerate() {
        let coeff = if b == 0 { 1.0 } else { e };
        if coeff == 0.0 {
            continue;
        }
        let (x, phase) = PauliString::from_index(num_qubits, b).action();
        for i in 0..dim {
            m[(i ^ x, i)] += phase(i) * coeff;
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(m.unscale(dim as f64)))
}

/// Reconstruction from exact expectations, bypassing sampling.
pub fn exact_reconstruction(state: &StateVector) -> Result<DensityMatrix> {
    let n = state.num_qubits();
    let expectations = PauliString::all(n)
        .map(|p| pauli_expectation(state, &p))
        .collect::<Result<Vec<_>>>()?;
    density_from_expectations(n, &expectations)
}
