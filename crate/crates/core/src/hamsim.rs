//! Hamiltonian time evolution: exact exponentials, Trotter products and a
//! split-step Fourier Schrödinger solver. Units have `ħ = 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::{apply_unchecked, Gate};
use crate::qft::{qft_circuit, QftSpec};
use crate::state::{check_capacity, log2_exact, StateVector};
use crate::tomography::PauliString;
use crate::C64;

/// Largest register for dense exponentiation.
pub const MAX_EXACT_QUBITS: usize = 10;
/// Hermiticity tolerance for term operators.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TermOperator {
    /// Dense Hermitian matrix acting on `qubits` (first listed is most significant).
    Dense { matrix: DMatrix<C64>, qubits: Vec<usize> },
    Pauli(PauliString),
}

/// `coefficient · operator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TermRepr", into = "TermRepr")]
pub struct HamiltonianTerm {
    coefficient: f64,
    operator: TermOperator,
}

impl HamiltonianTerm {
    pub fn dense(coefficient: f64, matrix: DMatrix<C64>, qubits: Vec<usize>) -> Result<Self> {
        let dim = 1usize << qubits.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        let mut seen = 0usize;
        for &q in &qubits {
            if q >= usize::BITS as usize || seen >> q & 1 == 1 {
                return Err(Error::DuplicateQubit(q));
            }
            seen |= 1 << q;
        }
        if (&matrix - matrix.adjoint()).iter().any(|z| z.norm() > HERMITIAN_TOL) {
            return Err(Error::NotHermitian);
        }
        Ok(Self {
            coefficient,
            operator: TermOperator::Dense { matrix, qubits },
        })
    }

    pub fn pauli(coefficient: f64, string: PauliString) -> Self {
        Self {
            coefficient,
            operator: TermOperator::Pauli(string),
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn operator(&self) -> &TermOperator {
        &self.operator
    }

    /// Smallest register the term fits in.
    pub fn min_qubits(&self) -> usize {
        match &self.operator {
            TermOperator::Dense { qubits, .. } => qubits.iter().map(|q| q + 1).max().unwrap_or(0),
            TermOperator::Pauli(p) => p.num_qubits(),
        }
    }

    fn check_register(&self, num_qubits: usize) -> Result<()> {
        let ok = match &self.operator {
            TermOperator::Dense { qubits, .. } => qubits.iter().all(|&q| q < num_qubits),
            TermOperator::Pauli(p) => p.num_qubits() == num_qubits,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: num_qubits,
                found: self.min_qubits(),
            })
        }
    }

    /// Full `2^n × 2^n` matrix of `coefficient · operator`.
    pub fn matrix(&self, num_qubits: usize) -> Result<DMatrix<C64>> {
        self.check_register(num_qubits)?;
        let m = match &self.operator {
            TermOperator::Dense { matrix, qubits } => embed_operator(num_qubits, matrix, qubits),
            TermOperator::Pauli(p) => p.matrix(),
        };
        Ok(m.scale(self.coefficient))
    }

    /// Apply `exp(s·i·coefficient·operator·τ)` in place, `s = ±1`.
    fn apply_exponential(&self, state: &mut StateVector, tau: f64, sign: f64) {
        let n = state.num_qubits();
        let angle = sign * self.coefficient * tau;
        match &self.operator {
            TermOperator::Pauli(p) => {
                // exp(iαP) = cos α·I + i sin α·P for an involution P.
                let (x, phase) = p.action();
                let (c, s) = (angle.cos(), C64::new(0.0, angle.sin()));
                let amps = state.amplitudes_mut();
                let old = amps.to_vec();
                for (i, a) in old.iter().enumerate() {
                    amps[i] = a * c;
                }
                for (i, a) in old.iter().enumerate() {
                    amps[i ^ x] += s * phase(i) * a;
                }
            }
            TermOperator::Dense { matrix, qubits } => {
                let u = hermitian_exponential(matrix, angle);
                let gate = Gate::known("EXP", Vec::new(), u);
                apply_unchecked(state.amplitudes_mut(), n, &gate, &[], qubits);
            }
        }
    }
}

/// `exp(iαH)` for Hermitian `H` via eigendecomposition.
fn hermitian_exponential(h: &DMatrix<C64>, alpha: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, alpha * l)),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint()
}

/// Embed a `2^k × 2^k` operator on `qubits` into an `n`-qubit register.
fn embed_operator(num_qubits: usize, m: &DMatrix<C64>, qubits: &[usize]) -> DMatrix<C64> {
    let dim = 1usize << num_qubits;
    let k = qubits.len();
    let bits: Vec<usize> = qubits.iter().map(|&q| 1 << (num_qubits - 1 - q)).collect();
    let mask: usize = bits.iter().sum();
    let local = |idx: usize| bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(idx & b != 0));
    let scatter = |base: usize, r: usize| {
        bits.iter()
            .enumerate()
            .fold(base & !mask, |acc, (j, &b)| if r >> (k - 1 - j) & 1 == 1 { acc | b } else { acc })
    };
    let mut out = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let lc = local(col);
        for r in 0..1 << k {
            out[(scatter(col, r), col)] += m[(r, lc)];
        }
    }
    out
}

/// Sum of all terms on an `n`-qubit register.
pub fn total_hamiltonian(terms: &[HamiltonianTerm], num_qubits: usize) -> Result<DMatrix<C64>> {
    let dim = 1usize << num_qubits;
    terms
        .iter()
        .try_fold(DMatrix::zeros(dim, dim), |acc, t| Ok(acc + t.matrix(num_qubits)?))
}

/// Sign of the exponent: physical evolution is `e^{−iHt}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseSign {
    #[default]
    Minus,
    Plus,
}

impl PhaseSign {
    fn factor(self) -> f64 {
        match self {
            PhaseSign::Minus => -1.0,
            PhaseSign::Plus => 1.0,
        }
    }
}

/// `e^{∓iHt}|ψ⟩` by dense diagonalization of `H = Σ terms`.
pub fn evolve_exact(terms: &[HamiltonianTerm], time: f64, state: &StateVector) -> Result<StateVector> {
    evolve_exact_signed(terms, time, state, PhaseSign::Minus)
}

pub fn evolve_exact_signed(terms: &[HamiltonianTerm], time: f64, state: &StateVector, sign: PhaseSign) -> Result<StateVector> {
    let n = state.num_qubits();
    check_capacity(n, MAX_EXACT_QUBITS)?;
    let h = total_hamiltonian(terms, n)?;
    let u = hermitian_exponential(&h, sign.factor() * time);
    StateVector::from_amplitudes((u * state.to_column()).iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrotterOrder {
    /// `Π_i e^{−iH_i δt}` in list order.
    First,
    /// Symmetric product: half steps outward, full step on the last term.
    Second,
}

impl TryFrom<u8> for TrotterOrder {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            1 => Ok(TrotterOrder::First),
            2 => Ok(TrotterOrder::Second),
            other => Err(Error::InvalidInput(format!("Trotter order {other} is not 1 or 2"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrotterPlan {
    pub terms: Vec<HamiltonianTerm>,
    pub total_time: f64,
    pub num_steps: usize,
    pub order: TrotterOrder,
    pub sign: PhaseSign,
}

impl TrotterPlan {
    pub fn new(terms: Vec<HamiltonianTerm>, total_time: f64, num_steps: usize, order: TrotterOrder) -> Result<Self> {
        if num_steps == 0 {
            return Err(Error::InvalidInput("Trotter plan needs at least one step".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidInput("Trotter plan needs at least one term".into()));
        }
        Ok(Self {
            terms,
            total_time,
            num_steps,
            order,
            sign: PhaseSign::Minus,
        })
    }
}

/// Apply the plan's product formula `num_steps` times.
pub fn evolve_trotter(plan: &TrotterPlan, state: &StateVector) -> Result<StateVector> {
    let n = state.num_qubits();
    for t in &plan.terms {
        t.check_register(n)?;
    }
    let dt = plan.total_time / plan.num_steps as f64;
    let s = plan.sign.factor();
    let mut out = state.clone();
    let terms = &plan.terms;
    for _ in 0..plan.num_steps {
        match plan.order {
            TrotterOrder::First => {
                for t in terms {
                    t.apply_exponential(&mut out, dt, s);
                }
            }
            TrotterOrder::Second => {
                let (last, rest) = terms.split_last().expect("plan has terms");
                for t in rest {
                    t.apply_exponential(&mut out, dt / 2.0, s);
                }
                last.apply_exponential(&mut out, dt, s);
                for t in rest.iter().rev() {
                    t.apply_exponential(&mut out, dt / 2.0, s);
                }
            }
        }
    }
    Ok(out)
}

/// Periodic one-dimensional Schrödinger problem on `[0, length)` with
/// `H = −∇²/(2·mass) + V(x)`, sampled at `x_j = j·length/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStepProblem {
    pub length: f64,
    pub mass: f64,
    pub potential: Vec<f64>,
    pub initial: Vec<C64>,
}

impl SplitStepProblem {
    fn validate(&self) -> Result<usize> {
        let n = log2_exact(self.initial.len())?;
        if self.potential.len() != self.initial.len() {
            return Err(Error::DimensionMismatch {
                expected: self.initial.len(),
                found: self.potential.len(),
            });
        }
        if !(self.length > 0.0 && self.mass > 0.0) {
            return Err(Error::InvalidInput("length and mass must be positive".into()));
        }
        Ok(n)
    }

    pub fn grid(&self) -> Vec<f64> {
        periodic_grid(self.length, self.initial.len())
    }
}

/// `points` equally spaced positions `j·length/points`.
pub fn periodic_grid(length: f64, points: usize) -> Vec<f64> {
    (0..points).map(|j| j as f64 * length / points as f64).collect()
}

/// Symmetric split-step evolution to `time` in `num_steps` steps: half a
/// potential kick, a full kinetic step applied in Fourier space through the
/// QFT, and another half kick. The input scale is preserved.
pub fn split_step_schrodinger(problem: &SplitStepProblem, time: f64, num_steps: usize) -> Result<Vec<C64>> {
    let frames = split_step_frames(problem, time, num_steps, num_steps.max(1))?;
    Ok(frames.into_iter().last().expect("final frame").1)
}

/// As [`split_step_schrodinger`], also returning the wavefunction every
/// `frame_every` steps (step 0 and the final step are always included).
pub fn split_step_frames(
    problem: &SplitStepProblem,
    time: f64,
    num_steps: usize,
    frame_every: usize,
) -> Result<Vec<(usize, Vec<C64>)>> {
    let n = problem.validate()?;
    if num_steps == 0 {
        if time != 0.0 {
            return Err(Error::InvalidInput("nonzero time needs at least one step".into()));
        }
        return Ok(vec![(0, problem.initial.clone())]);
    }
    let dim = 1usize << n;
    let norm = problem.initial.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(vec![(0, problem.initial.clone()), (num_steps, problem.initial.clone())]);
    }
    let dt = time / num_steps as f64;
    let half_kick: Vec<C64> = problem
        .potential
        .iter()
        .map(|v| C64::from_polar(1.0, -v * dt / 2.0))
        .collect();
    let two_pi_over_l = 2.0 * std::f64::consts::PI / problem.length;
    let kinetic: Vec<C64> = (0..dim)
        .map(|k| {
            let m = if k <= dim / 2 { k as f64 } else { k as f64 - dim as f64 };
            let kappa = m * two_pi_over_l;
            C64::from_polar(1.0, -kappa * kappa / (2.0 * problem.mass) * dt)
        })
        .collect();
    let forward: Circuit = qft_circuit(QftSpec::new(n))?;
    let backward = forward.inverse()?;

    let mut state = StateVector::normalized_from(problem.initial.clone())?;
    let mut frames = vec![(0, problem.initial.clone())];
    let every = frame_every.max(1);
    for s in 1..=num_steps {
        let kicked: Vec<C64> = state.amplitudes().iter().zip(&half_kick).map(|(a, k)| a * k).collect();
        let spectrum = forward.run_statevector(&StateVector::from_amplitudes(kicked)?)?;
        let moved: Vec<C64> = spectrum.amplitudes().iter().zip(&kinetic).map(|(a, k)| a * k).collect();
        let back = backward.run_statevector(&StateVector::from_amplitudes(moved)?)?;
        let kicked: Vec<C64> = back.amplitudes().iter().zip(&half_kick).map(|(a, k)| a * k).collect();
        state = StateVector::from_amplitudes(kicked)?;
        if s % every == 0 || s == num_steps {
            frames.push((s, state.amplitudes().iter().map(|a| a * norm).collect()));
        }
    }
    Ok(frames)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TermRepr {
    Pauli {
        coefficient: f64,
        pauli: String,
    },
    Dense {
        coefficient: f64,
        matrix: Vec<Vec<[f64; 2]>>,
        qubits: Vec<usize>,
    },
}

impl TryFrom<TermRepr> for HamiltonianTerm {
    type Error = Error;

    fn try_from(repr: TermRepr) -> Result<Self> {
        match repr {
            TermRepr::Pauli { coefficient, pauli } => Ok(HamiltonianTerm::pauli(coefficient, pauli.parse()?)),
            TermRepr::Dense {
                coefficient,
                matrix,
                qubits,
            } => {
                let rows = matrix.len();
                if matrix.iter().any(|r| r.len() != rows) {
                    return Err(Error::InvalidInput("term matrix is not square".into()));
                }
                let m = DMatrix::from_fn(rows, rows, |i, j| C64::new(matrix[i][j][0], matrix[i][j][1]));
                HamiltonianTerm::dense(coefficient, m, qubits)
            }
        }
    }
}

impl From<HamiltonianTerm> for TermRepr {
    fn from(t: HamiltonianTerm) -> Self {
        match t.operator {
            TermOperator::Pauli(p) => TermRepr::Pauli {
                coefficient: t.coefficient,
                pauli: p.to_string(),
            },
            TermOperator::Dense { matrix, qubits } => TermRepr::Dense {
                coefficient: t.coefficient,
                matrix: (0..matrix.nrows())
                    .map(|i| (0..matrix.ncols()).map(|j| [matrix[(i, j)].re, matrix[(i, j)].im]).collect())
                    .collect(),
                qubits,
            },
        }
    }
}
