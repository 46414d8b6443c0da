//! Pure states, Bloch coordinates and density matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::{ANALYTIC_TOL, C64, INPUT_TOL};

/// Default cap on register size: 2^26 amplitudes (1 GiB of `Complex64`).
pub const DEFAULT_MAX_QUBITS: usize = 26;

pub(crate) fn check_capacity(num_qubits: usize, max_qubits: usize) -> Result<()> {
    if num_qubits > max_qubits {
        return Err(Error::Capacity {
            num_qubits,
            max_qubits,
        });
    }
    Ok(())
}

pub(crate) fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// An `n`-qubit pure state stored as its `2^n` computational-basis amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits, subject to [`DEFAULT_MAX_QUBITS`].
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        Self::zero_state_with_budget(num_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_state_with_budget(num_qubits: usize, max_qubits: usize) -> Result<Self> {
        Self::basis_state_with_budget(num_qubits, 0, max_qubits)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        Self::basis_state_with_budget(num_qubits, index, DEFAULT_MAX_QUBITS)
    }

    fn basis_state_with_budget(num_qubits: usize, index: usize, max_qubits: usize) -> Result<Self> {
        check_capacity(num_qubits, max_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wrap raw amplitudes. The length must be a power of two; the vector is
    /// not normalized or checked for norm, which lets linear maps be applied to
    /// arbitrary vectors.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let num_qubits = log2_exact(amplitudes.len())?;
        check_capacity(num_qubits, DEFAULT_MAX_QUBITS)?;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wrap amplitudes and require unit norm within the input tolerance.
    pub fn from_normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let state = Self::from_amplitudes(amplitudes)?;
        let norm = state.norm();
        if (norm - 1.0).abs() > INPUT_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Wrap amplitudes and rescale them to unit norm.
    pub fn normalized_from(amplitudes: Vec<C64>) -> Result<Self> {
        let mut state = Self::from_amplitudes(amplitudes)?;
        let norm = state.norm();
        if norm == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        state.amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_dim(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Born probabilities `|amplitude_i|^2` indexed by basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Kronecker product `self ⊗ other`; `self` supplies the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let num_qubits = self.num_qubits + other.num_qubits;
        check_capacity(num_qubits, DEFAULT_MAX_QUBITS)?;
        let mut amplitudes = Vec::with_capacity(1usize << num_qubits);
        for a in &self.amplitudes {
            amplitudes.extend(other.amplitudes.iter().map(|b| a * b));
        }
        Ok(StateVector {
            num_qubits,
            amplitudes,
        })
    }

    /// Relabel basis states: amplitude at `i` moves to `perm(i)`.
    /// `perm` must be a bijection on `0..dim`.
    pub fn permute_basis(&self, perm: impl Fn(usize) -> usize) -> Result<StateVector> {
        let dim = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        let mut hit = vec![false; dim];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let j = perm(i);
            if j >= dim || hit[j] {
                return Err(Error::InvalidInput(format!(
                    "basis map is not a permutation (index {i} -> {j})"
                )));
            }
            hit[j] = true;
            out[j] = *a;
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amplitudes: out,
        })
    }

    /// Phase that best aligns `self` onto `reference`, i.e. `arg⟨self|reference⟩`.
    fn alignment_phase(&self, reference: &StateVector) -> C64 {
        let overlap: C64 = self
            .amplitudes
            .iter()
            .zip(&reference.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        if overlap.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            overlap / overlap.norm()
        }
    }

    /// Largest amplitude difference after removing the relative global phase.
    pub fn max_deviation_up_to_phase(&self, reference: &StateVector) -> Result<f64> {
        self.check_same_dim(reference)?;
        let phase = self.alignment_phase(reference);
        Ok(self
            .amplitudes
            .iter()
            .zip(&reference.amplitudes)
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest entrywise amplitude difference, phase included.
    pub fn max_deviation(&self, reference: &StateVector) -> Result<f64> {
        self.check_same_dim(reference)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&reference.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Copy with the largest-magnitude amplitude rotated onto the positive real axis.
    pub fn canonical_phase(&self) -> StateVector {
        let pivot = self
            .amplitudes
            .iter()
            .copied()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = if pivot.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            pivot.conj() / pivot.norm()
        };
        StateVector {
            num_qubits: self.num_qubits,
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
        }
    }

    /// Column vector for dense linear algebra.
    pub fn to_column(&self) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_column_slice(&self.amplitudes)
    }

    fn check_same_dim(&self, other: &StateVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct StateVectorRepr {
    num_qubits: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateVectorRepr {
            num_qubits: self.num_qubits,
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = StateVectorRepr::deserialize(deserializer)?;
        let amplitudes: Vec<C64> = repr
            .amplitudes
            .iter()
            .map(|[re, im]| C64::new(*re, *im))
            .collect();
        let state = StateVector::from_amplitudes(amplitudes).map_err(serde::de::Error::custom)?;
        if state.num_qubits != repr.num_qubits {
            return Err(serde::de::Error::custom(format!(
                "num_qubits = {} but {} amplitudes were given",
                repr.num_qubits,
                state.dim()
            )));
        }
        Ok(state)
    }
}

/// Single-qubit pure state as `e^{iα}[cos(β/2)|0⟩ + e^{iγ} sin(β/2)|1⟩]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochCoordinates {
    /// Global phase.
    pub alpha: f64,
    /// Polar angle in `[0, π]`.
    pub beta: f64,
    /// Relative phase in `[0, 2π)`.
    pub gamma: f64,
}

impl BlochCoordinates {
    /// Decompose a normalized one-qubit state.
    ///
    /// `alpha` is taken from the `|0⟩` amplitude (or from `|1⟩` at the south
    /// pole), so states with a real non-negative `|0⟩` amplitude get `alpha = 0`
    /// and reconstruction is exact including the global phase.
    pub fn decompose(state: &StateVector) -> Result<Self> {
        if state.num_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: state.dim(),
            });
        }
        let norm = state.norm();
        if (norm - 1.0).abs() > INPUT_TOL {
            return Err(Error::NotNormalized(norm));
        }
        let [c0, c1] = [state.amplitudes[0], state.amplitudes[1]];
        let beta = 2.0 * c1.norm().atan2(c0.norm());
        let (alpha, gamma) = if c0.norm() > ANALYTIC_TOL {
            let alpha = c0.arg();
            let gamma = if c1.norm() > ANALYTIC_TOL {
                c1.arg() - alpha
            } else {
                0.0
            };
            (alpha, gamma)
        } else {
            // South pole: only the combined phase alpha + gamma is defined.
            (c1.arg(), 0.0)
        };
        Ok(Self {
            alpha: wrap_signed(alpha),
            beta,
            gamma: gamma.rem_euclid(2.0 * PI),
        })
    }

    pub fn reconstruct(&self) -> StateVector {
        let global = C64::from_polar(1.0, self.alpha);
        let c0 = global * (self.beta / 2.0).cos();
        let c1 = global * C64::from_polar((self.beta / 2.0).sin(), self.gamma);
        StateVector {
            num_qubits: 1,
            amplitudes: vec![c0, c1],
        }
    }

    /// Cartesian Bloch vector `(sin β cos γ, sin β sin γ, cos β)`.
    pub fn cartesian(&self) -> [f64; 3] {
        [
            self.beta.sin() * self.gamma.cos(),
            self.beta.sin() * self.gamma.sin(),
            self.beta.cos(),
        ]
    }
}

fn wrap_signed(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Hermitian, positive semidefinite, unit-trace operator on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(state: &StateVector) -> Self {
        let col = state.to_column();
        Self {
            num_qubits: state.num_qubits(),
            entries: &col * col.adjoint(),
        }
    }

    /// `ρ = Σ p_α |ψ_α⟩⟨ψ_α|`.
    pub fn from_ensemble(ensemble: &[(f64, StateVector)]) -> Result<Self> {
        let (_, first) = ensemble
            .first()
            .ok_or_else(|| Error::InvalidInput("empty ensemble".into()))?;
        let n = first.num_qubits();
        let mut total = 0.0;
        let mut entries = DMatrix::zeros(first.dim(), first.dim());
        for (p, state) in ensemble {
            if state.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: state.num_qubits(),
                });
            }
            if !(*p >= 0.0) {
                return Err(Error::InvalidInput(format!("negative probability {p}")));
            }
            let norm = state.norm();
            if (norm - 1.0).abs() > INPUT_TOL {
                return Err(Error::NotNormalized(norm));
            }
            let col = state.to_column();
            entries += (&col * col.adjoint()) * C64::new(*p, 0.0);
            total += p;
        }
        if (total - 1.0).abs() > ANALYTIC_TOL {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            num_qubits: n,
            entries,
        })
    }

    /// Validate and wrap a raw matrix.
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let num_qubits = log2_exact(entries.nrows())?;
        let rho = Self {
            num_qubits,
            entries,
        };
        if !rho.is_hermitian(INPUT_TOL) {
            return Err(Error::NotHermitian);
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > INPUT_TOL || tr.im.abs() > INPUT_TOL {
            return Err(Error::InvalidInput(format!("trace {tr} is not 1")));
        }
        if rho.min_eigenvalue() < -INPUT_TOL {
            return Err(Error::InvalidInput("matrix is not positive semidefinite".into()));
        }
        Ok(rho)
    }

    /// Wrap without validation; used for estimates that may be slightly unphysical.
    pub(crate) fn from_matrix_unchecked(entries: DMatrix<C64>) -> Self {
        let num_qubits = entries.nrows().trailing_zeros() as usize;
        Self {
            num_qubits,
            entries,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let dim = self.dim();
        (0..dim).all(|r| (r..dim).all(|c| (self.entries[(r, c)] - self.entries[(c, r)].conj()).norm() <= tol))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.entries.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    /// Frobenius norm of `self − other`.
    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        (&self.entries - &other.entries).norm()
    }

    /// Reduced state on the qubits in `keep` (in the given order), tracing out the rest.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.num_qubits;
        for (i, &q) in keep.iter().enumerate() {
            if q >= n {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits: n,
                });
            }
            if keep[..i].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        let k = keep.len();
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let bit = |q: usize| 1usize << (n - 1 - q);
        let compose = |kept: usize, rest: usize| {
            let mut idx = 0;
            for (j, &q) in keep.iter().enumerate() {
                if kept >> (k - 1 - j) & 1 == 1 {
                    idx |= bit(q);
                }
            }
            for (j, &q) in traced.iter().enumerate() {
                if rest >> (traced.len() - 1 - j) & 1 == 1 {
                    idx |= bit(q);
                }
            }
            idx
        };
        let dk = 1usize << k;
        let out = DMatrix::from_fn(dk, dk, |r, c| {
            (0..1usize << traced.len())
                .map(|e| self.entries[(compose(r, e), compose(c, e))])
                .sum()
        });
        Ok(DensityMatrix {
            num_qubits: k,
            entries: out,
        })
    }

    /// Project onto the physical set: clip negative eigenvalues and renormalize the trace.
    pub fn clipped_to_physical(&self) -> DensityMatrix {
        let eig = self.entries.clone().symmetric_eigen();
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for (i, &value) in clipped.iter().enumerate() {
            if value == 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(i);
            out += (v * v.adjoint()) * C64::new(value / total, 0.0);
        }
        DensityMatrix {
            num_qubits: self.num_qubits,
            entries: out,
        }
    }
}
