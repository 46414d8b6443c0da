//! Gate set and gate application.
//!
//! Gates act on a statevector through strided amplitude updates; the full
//! `2^n × 2^n` operator is never formed on the hot path. [`embedded_matrix`]
//! builds that operator explicitly and serves as the reference the fast path
//! is tested against.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::state::StateVector;
use crate::{ANALYTIC_TOL, C64};

const PARALLEL_MIN_QUBITS: usize = 14;
const PARALLEL_INNER_STRIDE: usize = 1 << 12;

/// A named unitary on `arity` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    name: String,
    params: Vec<f64>,
    matrix: DMatrix<C64>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mat(dim: usize, entries: &[C64]) -> DMatrix<C64> {
    DMatrix::from_row_slice(dim, dim, entries)
}

pub(crate) fn is_unitary(m: &DMatrix<C64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let product = m * m.adjoint();
    let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    (product - id).iter().all(|e| e.norm() <= tol)
}

impl Gate {
    /// Build a gate from an explicit matrix; fails unless the matrix is a
    /// unitary of power-of-two dimension.
    pub fn new(name: impl Into<String>, params: Vec<f64>, matrix: DMatrix<C64>) -> Result<Self> {
        let name = name.into();
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if !matrix.nrows().is_power_of_two() || matrix.nrows() < 2 {
            return Err(Error::NotPowerOfTwo(matrix.nrows()));
        }
        if !is_unitary(&matrix, ANALYTIC_TOL) {
            return Err(Error::NotUnitary(name));
        }
        Ok(Self {
            name,
            params,
            matrix,
        })
    }

    pub(crate) fn known(name: &str, params: Vec<f64>, matrix: DMatrix<C64>) -> Self {
        debug_assert!(is_unitary(&matrix, ANALYTIC_TOL), "{name} is not unitary");
        Self {
            name: name.to_string(),
            params,
            matrix,
        }
    }

    /// Look up a gate by name (case-insensitive).
    ///
    /// Recognised: `I X Y Z H S SDG T TDG PHASE(φ) RX(θ) RY(θ) RZ(θ)
    /// U3(θ,φ,λ) CNOT/CX SWAP TOFFOLI/CCX`.
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        let expect = |n: usize| -> Result<()> {
            if params.len() != n {
                return Err(Error::GateParameters {
                    name: upper.clone(),
                    expected: n,
                    found: params.len(),
                });
            }
            Ok(())
        };
        let gate = match upper.as_str() {
            "I" | "ID" => {
                expect(0)?;
                Self::identity()
            }
            "X" => {
                expect(0)?;
                Self::x()
            }
            "Y" => {
                expect(0)?;
                Self::y()
            }
            "Z" => {
                expect(0)?;
                Self::z()
            }
            "H" => {
                expect(0)?;
                Self::h()
            }
            "S" => {
                expect(0)?;
                Self::s()
            }
            "SDG" => {
                expect(0)?;
                Self::sdg()
            }
            "T" => {
                expect(0)?;
                Self::t()
            }
            "TDG" => {
                expect(0)?;
                Self::tdg()
            }
            "PHASE" | "P" => {
                expect(1)?;
                Self::phase(params[0])
            }
            "RX" => {
                expect(1)?;
                Self::rx(params[0])
            }
            "RY" => {
                expect(1)?;
                Self::ry(params[0])
            }
            "RZ" => {
                expect(1)?;
                Self::rz(params[0])
            }
            "U3" => {
                expect(3)?;
                Self::u3(params[0], params[1], params[2])
            }
            "CNOT" | "CX" => {
                expect(0)?;
                Self::cnot()
            }
            "SWAP" => {
                expect(0)?;
                Self::swap()
            }
            "TOFFOLI" | "CCX" => {
                expect(0)?;
                Self::toffoli()
            }
            _ => return Err(Error::UnknownGate(name.to_string())),
        };
        Ok(gate)
    }

    pub fn identity() -> Self {
        Self::known("I", vec![], DMatrix::identity(2, 2))
    }

    /// Pauli X, `|0⟩ ↔ |1⟩`.
    pub fn x() -> Self {
        Self::known("X", vec![], mat(2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]))
    }

    /// Pauli Y, `|0⟩ → i|1⟩`, `|1⟩ → −i|0⟩`.
    pub fn y() -> Self {
        Self::known("Y", vec![], mat(2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]))
    }

    pub fn z() -> Self {
        Self::known("Z", vec![], mat(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]))
    }

    pub fn h() -> Self {
        let h = FRAC_1_SQRT_2;
        Self::known("H", vec![], mat(2, &[c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)]))
    }

    pub fn s() -> Self {
        Self::known("S", vec![], Self::phase_matrix(PI / 2.0))
    }

    pub fn sdg() -> Self {
        Self::known("SDG", vec![], Self::phase_matrix(-PI / 2.0))
    }

    pub fn t() -> Self {
        Self::known("T", vec![], Self::phase_matrix(PI / 4.0))
    }

    pub fn tdg() -> Self {
        Self::known("TDG", vec![], Self::phase_matrix(-PI / 4.0))
    }

    fn phase_matrix(phi: f64) -> DMatrix<C64> {
        mat(2, &[c(1., 0.), c(0., 0.), c(0., 0.), C64::from_polar(1.0, phi)])
    }

    /// Phase shift `R_φ`: `|1⟩ → e^{iφ}|1⟩`.
    pub fn phase(phi: f64) -> Self {
        Self::known("PHASE", vec![phi], Self::phase_matrix(phi))
    }

    pub fn rx(theta: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        Self::known("RX", vec![theta], mat(2, &[c(co, 0.), c(0., -s), c(0., -s), c(co, 0.)]))
    }

    pub fn ry(theta: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        Self::known("RY", vec![theta], mat(2, &[c(co, 0.), c(-s, 0.), c(s, 0.), c(co, 0.)]))
    }

    pub fn rz(theta: f64) -> Self {
        Self::known(
            "RZ",
            vec![theta],
            mat(
                2,
                &[C64::from_polar(1.0, -theta / 2.0), c(0., 0.), c(0., 0.), C64::from_polar(1.0, theta / 2.0)],
            ),
        )
    }

    /// Three-angle Euler gate
    /// `[[cos θ/2, −e^{iλ} sin θ/2], [e^{iφ} sin θ/2, e^{i(φ+λ)} cos θ/2]]`.
    ///
    /// `φ` and `λ` are reduced into `[0, 2π)`; `θ` is kept as given since
    /// shifting it by `2π` would flip the overall sign.
    pub fn u3(theta: f64, phi: f64, lam: f64) -> Self {
        let phi = phi.rem_euclid(2.0 * PI);
        let lam = lam.rem_euclid(2.0 * PI);
        let (s, co) = (theta / 2.0).sin_cos();
        Self::known(
            "U3",
            vec![theta, phi, lam],
            mat(
                2,
                &[
                    c(co, 0.),
                    -C64::from_polar(s, lam),
                    C64::from_polar(s, phi),
                    C64::from_polar(co, phi + lam),
                ],
            ),
        )
    }

    /// `|q1, q2⟩ → |q1, q2 ⊕ q1⟩`.
    pub fn cnot() -> Self {
        let mut m = DMatrix::zeros(4, 4);
        for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(r, col)] = c(1., 0.);
        }
        Self::known("CNOT", vec![], m)
    }

    pub fn swap() -> Self {
        let mut m = DMatrix::zeros(4, 4);
        for (r, col) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            m[(r, col)] = c(1., 0.);
        }
        Self::known("SWAP", vec![], m)
    }

    /// `|q1, q2, q3⟩ → |q1, q2, q3 ⊕ q1·q2⟩`.
    pub fn toffoli() -> Self {
        let mut m = DMatrix::identity(8, 8);
        m[(6, 6)] = c(0., 0.);
        m[(7, 7)] = c(0., 0.);
        m[(6, 7)] = c(1., 0.);
        m[(7, 6)] = c(1., 0.);
        Self::known("TOFFOLI", vec![], m)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Number of qubits the gate acts on.
    pub fn arity(&self) -> usize {
        self.matrix.nrows().trailing_zeros() as usize
    }

    /// The adjoint gate. Named gates stay named so circuits remain serializable.
    pub fn inverse(&self) -> Gate {
        let p = &self.params;
        match self.name.as_str() {
            "I" | "X" | "Y" | "Z" | "H" | "CNOT" | "SWAP" | "TOFFOLI" => self.clone(),
            "S" => Self::sdg(),
            "SDG" => Self::s(),
            "T" => Self::tdg(),
            "TDG" => Self::t(),
            "PHASE" => Self::phase(-p[0]),
            "RX" => Self::rx(-p[0]),
            "RY" => Self::ry(-p[0]),
            "RZ" => Self::rz(-p[0]),
            "U3" => Self::u3(-p[0], -p[2], -p[1]),
            _ => {
                let name = match self.name.strip_suffix("_DG") {
                    Some(base) => base.to_string(),
                    None => format!("{}_DG", self.name),
                };
                Gate {
                    name,
                    params: self.params.clone(),
                    matrix: self.matrix.adjoint(),
                }
            }
        }
    }
}

#[inline]
fn bit(num_qubits: usize, qubit: usize) -> usize {
    1usize << (num_qubits - 1 - qubit)
}

pub(crate) fn validate_operands(num_qubits: usize, gate: &Gate, controls: &[usize], targets: &[usize]) -> Result<()> {
    if targets.len() != gate.arity() {
        return Err(Error::DimensionMismatch {
            expected: gate.arity(),
            found: targets.len(),
        });
    }
    let all: Vec<usize> = controls.iter().chain(targets).copied().collect();
    for (i, &q) in all.iter().enumerate() {
        if q >= num_qubits {
            return Err(Error::QubitOutOfRange { index: q, num_qubits });
        }
        if all[..i].contains(&q) {
            return Err(Error::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Apply `gate` to `targets`; `targets[0]` maps to the gate's most significant local bit.
pub fn apply(state: &StateVector, gate: &Gate, targets: &[usize]) -> Result<StateVector> {
    apply_controlled(state, gate, &[], targets)
}

/// Apply `gate` to `targets` on the subspace where every control qubit is `|1⟩`.
pub fn apply_controlled(state: &StateVector, gate: &Gate, controls: &[usize], targets: &[usize]) -> Result<StateVector> {
    validate_operands(state.num_qubits(), gate, controls, targets)?;
    let mut out = state.clone();
    apply_unchecked(out.amplitudes_mut(), state.num_qubits(), gate, controls, targets);
    Ok(out)
}

/// In-place application; operands must already be validated.
pub(crate) fn apply_unchecked(amps: &mut [C64], num_qubits: usize, gate: &Gate, controls: &[usize], targets: &[usize]) {
    let cmask = controls.iter().fold(0, |m, &q| m | bit(num_qubits, q));
    if targets.len() == 1 {
        let m = &gate.matrix;
        let u = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
        apply_single(amps, num_qubits, u, bit(num_qubits, targets[0]), cmask);
    } else {
        apply_multi(amps, num_qubits, gate, cmask, targets);
    }
}

#[inline]
fn update_pair(u: &[C64; 4], a: &mut C64, b: &mut C64) {
    let (x, y) = (*a, *b);
    *a = u[0] * x + u[1] * y;
    *b = u[2] * x + u[3] * y;
}

fn apply_single(amps: &mut [C64], num_qubits: usize, u: [C64; 4], stride: usize, cmask: usize) {
    let block = 2 * stride;
    // Within a block of length 2·stride the target bit is 0 in the first half
    // and 1 in the second; `base` recovers the absolute index for control tests.
    let run_block = |base: usize, chunk: &mut [C64]| {
        let (lo, hi) = chunk.split_at_mut(stride);
        if cmask == 0 {
            lo.iter_mut().zip(hi.iter_mut()).for_each(|(a, b)| update_pair(&u, a, b));
        } else {
            for (i, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if (base + i) & cmask == cmask {
                    update_pair(&u, a, b);
                }
            }
        }
    };
    if num_qubits < PARALLEL_MIN_QUBITS {
        amps.chunks_mut(block).enumerate().for_each(|(k, chunk)| run_block(k * block, chunk));
    } else if stride >= PARALLEL_INNER_STRIDE {
        for (k, chunk) in amps.chunks_mut(block).enumerate() {
            let base = k * block;
            let (lo, hi) = chunk.split_at_mut(stride);
            lo.par_iter_mut().zip(hi.par_iter_mut()).enumerate().for_each(|(i, (a, b))| {
                if (base + i) & cmask == cmask {
                    update_pair(&u, a, b);
                }
            });
        }
    } else {
        amps.par_chunks_mut(block).enumerate().for_each(|(k, chunk)| run_block(k * block, chunk));
    }
}

fn apply_multi(amps: &mut [C64], num_qubits: usize, gate: &Gate, cmask: usize, targets: &[usize]) {
    let k = targets.len();
    let local_dim = 1usize << k;
    let offsets: Vec<usize> = (0..local_dim)
        .map(|l| {
            (0..k)
                .filter(|j| l >> (k - 1 - j) & 1 == 1)
                .fold(0, |acc, j| acc | bit(num_qubits, targets[j]))
        })
        .collect();
    let tmask = offsets[local_dim - 1];
    let m = &gate.matrix;
    let mut local = vec![C64::new(0.0, 0.0); local_dim];
    for base in 0..amps.len() {
        if base & tmask != 0 || base & cmask != cmask {
            continue;
        }
        for (l, off) in offsets.iter().enumerate() {
            local[l] = amps[base | off];
        }
        for (r, off) in offsets.iter().enumerate() {
            amps[base | off] = (0..local_dim).map(|col| m[(r, col)] * local[col]).sum();
        }
    }
}

/// Dense `2^n × 2^n` operator of `gate` on `targets` controlled by `controls`,
/// built entry by entry from the definition. Reference path for tests and
/// small-register analysis; exponential in `num_qubits`.
pub fn embedded_matrix(num_qubits: usize, gate: &Gate, controls: &[usize], targets: &[usize]) -> Result<DMatrix<C64>> {
    validate_operands(num_qubits, gate, controls, targets)?;
    let dim = 1usize << num_qubits;
    let k = targets.len();
    let local = |idx: usize| {
        targets
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &q)| acc | ((idx >> (num_qubits - 1 - q)) & 1) << (k - 1 - j))
    };
    let tmask = targets.iter().fold(0, |m, &q| m | bit(num_qubits, q));
    let cmask = controls.iter().fold(0, |m, &q| m | bit(num_qubits, q));
    Ok(DMatrix::from_fn(dim, dim, |r, col| {
        if col & cmask != cmask {
            return if r == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        }
        if r & !tmask != col & !tmask {
            return C64::new(0.0, 0.0);
        }
        gate.matrix[(local(r), local(col))]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = stream_rng(seed, 0);
        let amps = (0..1 << n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        StateVector::normalized_from(amps).unwrap()
    }

    fn dense_apply(m: &DMatrix<C64>, s: &StateVector) -> StateVector {
        StateVector::from_amplitudes((m * s.to_column()).iter().copied().collect()).unwrap()
    }

    fn close(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) -> bool {
        (a - b).iter().all(|e| e.norm() <= tol)
    }

    #[test]
    fn builtin_matrices() {
        let x = Gate::builtin("x", &[]).unwrap();
        assert_eq!(x.matrix(), &mat(2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]));
        let plus = apply(&StateVector::zero_state(1).unwrap(), &Gate::h(), &[0]).unwrap();
        let h = FRAC_1_SQRT_2;
        assert!(plus.max_deviation(&StateVector::from_amplitudes(vec![c(h, 0.), c(h, 0.)]).unwrap()).unwrap() < 1e-15);
        assert_eq!(Gate::builtin("PHASE", &[0.0]).unwrap().matrix(), &DMatrix::identity(2, 2));
        assert!(matches!(Gate::builtin("FOO", &[]), Err(Error::UnknownGate(_))));
        assert!(matches!(Gate::builtin("PHASE", &[]), Err(Error::GateParameters { .. })));
    }

    #[test]
    fn table_gate_actions() {
        let zero = StateVector::zero_state(1).unwrap();
        let one = StateVector::basis_state(1, 1).unwrap();
        let y0 = apply(&zero, &Gate::y(), &[0]).unwrap();
        assert_eq!(y0.amplitudes(), &[c(0., 0.), c(0., 1.)]);
        let y1 = apply(&one, &Gate::y(), &[0]).unwrap();
        assert_eq!(y1.amplitudes(), &[c(0., -1.), c(0., 0.)]);
        let z1 = apply(&one, &Gate::z(), &[0]).unwrap();
        assert_eq!(z1.amplitudes(), &[c(0., 0.), c(-1., 0.)]);
        for q1 in 0..2 {
            for q2 in 0..2 {
                let s = StateVector::basis_state(2, q1 << 1 | q2).unwrap();
                let cx = apply(&s, &Gate::cnot(), &[0, 1]).unwrap();
                assert_eq!(cx, StateVector::basis_state(2, q1 << 1 | (q2 ^ q1)).unwrap());
                let sw = apply(&s, &Gate::swap(), &[0, 1]).unwrap();
                assert_eq!(sw, StateVector::basis_state(2, q2 << 1 | q1).unwrap());
            }
        }
    }

    #[test]
    fn u3_identities() {
        let up_to_phase = |a: &Gate, b: &Gate| {
            let sa = StateVector::from_amplitudes(a.matrix().iter().copied().collect()).unwrap();
            let sb = StateVector::from_amplitudes(b.matrix().iter().copied().collect()).unwrap();
            sa.max_deviation_up_to_phase(&sb).unwrap()
        };
        assert!(up_to_phase(&Gate::u3(PI, 0.0, PI), &Gate::x()) < 1e-12);
        assert!(up_to_phase(&Gate::u3(PI / 2.0, 0.0, PI), &Gate::h()) < 1e-12);
        assert!(close(Gate::u3(0.0, 0.0, 0.0).matrix(), &DMatrix::identity(2, 2), 0.0));
        // φ, λ are reduced without changing the matrix.
        assert!(close(Gate::u3(1.0, 2.0 + 2.0 * PI, -3.0).matrix(), Gate::u3(1.0, 2.0, 2.0 * PI - 3.0).matrix(), 1e-12));
        let u = Gate::u3(0.3, 1.1, 4.0);
        assert!(close(&(u.matrix() * u.inverse().matrix()), &DMatrix::identity(2, 2), 1e-12));
    }

    #[test]
    fn not_gate_flips_probabilities() {
        let s = StateVector::from_amplitudes(vec![c(0.6f64.sqrt(), 0.), c(0.4f64.sqrt(), 0.)]).unwrap();
        let out = apply(&s, &Gate::x(), &[0]).unwrap();
        let p = out.probabilities();
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn controlled_x_matches_cnot_and_toffoli() {
        for i in 0..4 {
            let s = StateVector::basis_state(2, i).unwrap();
            let a = apply_controlled(&s, &Gate::x(), &[0], &[1]).unwrap();
            let b = apply(&s, &Gate::cnot(), &[0, 1]).unwrap();
            assert_eq!(a, b);
        }
        for i in 0..8 {
            let s = StateVector::basis_state(3, i).unwrap();
            let a = apply_controlled(&s, &Gate::x(), &[0, 1], &[2]).unwrap();
            let b = apply(&s, &Gate::toffoli(), &[0, 1, 2]).unwrap();
            assert_eq!(a, b);
            let expected = i ^ ((i >> 2) & (i >> 1) & 1);
            assert_eq!(b, StateVector::basis_state(3, expected).unwrap());
        }
        let s = random_state(3, 9);
        assert_eq!(apply_controlled(&s, &Gate::h(), &[], &[1]).unwrap(), apply(&s, &Gate::h(), &[1]).unwrap());
    }

    #[test]
    fn operand_errors() {
        let s = StateVector::zero_state(2).unwrap();
        assert!(matches!(apply(&s, &Gate::x(), &[2]), Err(Error::QubitOutOfRange { .. })));
        assert!(matches!(apply(&s, &Gate::cnot(), &[1, 1]), Err(Error::DuplicateQubit(1))));
        assert!(matches!(apply_controlled(&s, &Gate::x(), &[0], &[0]), Err(Error::DuplicateQubit(0))));
        assert!(matches!(apply(&s, &Gate::cnot(), &[0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_non_unitary() {
        let m = mat(2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(Gate::new("bad", vec![], m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn fast_apply_matches_dense_oracle_on_four_qubits() {
        let s = random_state(4, 1);
        let cases: Vec<(Gate, Vec<usize>, Vec<usize>)> = vec![
            (Gate::h(), vec![], vec![2]),
            (Gate::u3(0.4, 1.0, 2.0), vec![], vec![0]),
            (Gate::cnot(), vec![], vec![3, 1]),
            (Gate::swap(), vec![], vec![0, 3]),
            (Gate::toffoli(), vec![], vec![2, 0, 3]),
            (Gate::phase(0.7), vec![1, 3], vec![0]),
            (Gate::swap(), vec![2], vec![1, 0]),
        ];
        for (g, ctrl, tgt) in cases {
            let fast = apply_controlled(&s, &g, &ctrl, &tgt).unwrap();
            let dense = dense_apply(&embedded_matrix(4, &g, &ctrl, &tgt).unwrap(), &s);
            assert!(fast.max_deviation(&dense).unwrap() < 1e-12, "{} {:?} {:?}", g.name(), ctrl, tgt);
        }
    }

    #[test]
    fn parallel_path_matches_dense_on_large_register() {
        let n = PARALLEL_MIN_QUBITS;
        let s = random_state(n, 5);
        for q in [0, 1, n - 1] {
            let g = Gate::u3(0.9, 0.2, 1.7);
            let fast = apply_controlled(&s, &g, &[(q + 3) % n], &[q]).unwrap();
            // Reference on the pair structure without the dense matrix.
            let mut expected = s.clone().into_amplitudes();
            let (tb, cb) = (bit(n, q), bit(n, (q + 3) % n));
            for i in 0..expected.len() {
                if i & tb == 0 && i & cb != 0 {
                    let (a, b) = (expected[i], expected[i | tb]);
                    let m = g.matrix();
                    expected[i] = m[(0, 0)] * a + m[(0, 1)] * b;
                    expected[i | tb] = m[(1, 0)] * a + m[(1, 1)] * b;
                }
            }
            let expected = StateVector::from_amplitudes(expected).unwrap();
            assert!(fast.max_deviation(&expected).unwrap() < 1e-12);
        }
    }

    fn arb_gate() -> impl Strategy<Value = (Gate, usize)> {
        prop_oneof![
            Just((Gate::x(), 1)),
            Just((Gate::y(), 1)),
            Just((Gate::z(), 1)),
            Just((Gate::h(), 1)),
            (0.0..2.0 * PI).prop_map(|p| (Gate::phase(p), 1)),
            (0.0..PI, 0.0..2.0 * PI, 0.0..2.0 * PI).prop_map(|(a, b, c)| (Gate::u3(a, b, c), 1)),
            Just((Gate::cnot(), 2)),
            Just((Gate::swap(), 2)),
            Just((Gate::toffoli(), 3)),
        ]
    }

    proptest! {
        #[test]
        fn fast_apply_agrees_with_dense((g, k) in arb_gate(), seed in any::<u64>(), perm_seed in any::<u64>()) {
            let mut rng = stream_rng(perm_seed, 1);
            let mut perm: Vec<usize> = (0..4).collect();
            for i in (1..perm.len()).rev() { perm.swap(i, rng.random_range(0..=i)); }
            let s = random_state(4, seed);
            let targets = &perm[..k];
            let out = apply(&s, &g, targets).unwrap();
            let dense = dense_apply(&embedded_matrix(4, &g, &[], targets).unwrap(), &s);
            prop_assert!(out.max_deviation(&dense).unwrap() < 1e-12);
            prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn involutions_return_to_start(seed in any::<u64>(), q in 0usize..3) {
            let s = random_state(4, seed);
            let two = [q, q + 1];
            let three = [q.min(1), q.min(1) + 1, 3];
            for (g, t) in [(Gate::x(), &two[..1]), (Gate::h(), &two[..1]), (Gate::swap(), &two[..]), (Gate::cnot(), &two[..]), (Gate::toffoli(), &three[..])] {
                let back = apply(&apply(&s, &g, t).unwrap(), &g, t).unwrap();
                prop_assert!(back.max_deviation(&s).unwrap() < 1e-12);
            }
        }
    }
}
