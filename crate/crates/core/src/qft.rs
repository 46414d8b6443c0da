//! Quantum Fourier transform.
//!
//! The forward transform uses the positive-exponent convention
//! `β_k = N^{-1/2} Σ_j α_j e^{2πi jk/N}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::Gate;
use crate::state::{check_capacity, log2_exact, StateVector, DEFAULT_MAX_QUBITS};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QftSpec {
    pub num_qubits: usize,
    /// Append the SWAP layer that undoes the transform's bit reversal.
    pub include_final_swaps: bool,
}

impl QftSpec {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            include_final_swaps: true,
        }
    }

    /// `n(n+1)/2` Hadamard and controlled-phase gates plus `⌊n/2⌋` swaps when enabled.
    pub fn gate_count(&self) -> usize {
        let n = self.num_qubits;
        n * (n + 1) / 2 + if self.include_final_swaps { n / 2 } else { 0 }
    }
}

/// Build the transform on qubits `0..n`, qubit 0 being the most significant.
pub fn qft_circuit(spec: QftSpec) -> Result<Circuit> {
    let n = spec.num_qubits;
    if n == 0 {
        return Err(Error::InvalidInput("QFT needs at least one qubit".into()));
    }
    check_capacity(n, DEFAULT_MAX_QUBITS)?;
    let mut circuit = Circuit::new(n, 0);
    for j in 0..n {
        circuit.h(j)?;
        for k in j + 1..n {
            let angle = 2.0 * PI / (1u64 << (k - j + 1)) as f64;
            circuit.push_controlled(Gate::phase(angle), &[k], &[j])?;
        }
    }
    if spec.include_final_swaps {
        for i in 0..n / 2 {
            circuit.push_gate(Gate::swap(), &[i, n - 1 - i])?;
        }
    }
    debug_assert_eq!(circuit.gate_count(), spec.gate_count());
    Ok(circuit)
}

pub fn inverse_qft_circuit(spec: QftSpec) -> Result<Circuit> {
    qft_circuit(spec)?.inverse()
}

pub fn apply_qft(state: &StateVector) -> Result<StateVector> {
    qft_circuit(QftSpec::new(state.num_qubits()))?.run_statevector(state)
}

pub fn apply_inverse_qft(state: &StateVector) -> Result<StateVector> {
    inverse_qft_circuit(QftSpec::new(state.num_qubits()))?.run_statevector(state)
}

/// Physical wavenumber carried by output mode `k` of the forward transform
/// on `dim` points. With the positive exponent, a sample `e^{imx}` lands in
/// mode `-m mod dim`. The Nyquist mode maps to 0.
pub fn mode_wavenumber(k: usize, dim: usize) -> f64 {
    let half = dim / 2;
    if dim > 1 && k == half {
        0.0
    } else if k < half {
        -(k as f64)
    } else {
        (dim - k) as f64
    }
}

/// Spectral derivative of periodic samples: transform, multiply each mode by
/// `i·κ·wavenumber_scale` where `κ` is its physical wavenumber, transform back.
///
/// For samples on `x_j = 2πj/N` use `wavenumber_scale = 1`; for a period `L`
/// use `2π/L`. Samples are normalized before the transform and rescaled after.
pub fn qft_derivative_demo(samples: &[C64], wavenumber_scale: f64) -> Result<Vec<C64>> {
    let n = log2_exact(samples.len())?;
    let dim = samples.len();
    let norm = samples.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); dim]);
    }
    let spec = QftSpec::new(n);
    let state = StateVector::normalized_from(samples.to_vec())?;
    let spectrum = qft_circuit(spec)?.run_statevector(&state)?;
    let scaled: Vec<C64> = spectrum
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, b)| b * C64::new(0.0, mode_wavenumber(k, dim) * wavenumber_scale))
        .collect();
    let back = inverse_qft_circuit(spec)?.run_statevector(&StateVector::from_amplitudes(scaled)?)?;
    Ok(back.amplitudes().iter().map(|a| a * norm).collect())
}
