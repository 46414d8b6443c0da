//! Loading classical data into quantum registers.
//!
//! [`amplitude_load`] builds a disentangling circuit from multiplexed
//! `RZ`/`RY` rotations that maps the target state to `|0…0⟩`, then inverts it.
//! [`state_load`] writes a bit string into a data qubit entangled with a
//! uniformly superposed address register.

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::Gate;
use crate::state::{log2_exact, StateVector};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadPlan {
    pub target_qubits: usize,
    pub circuit: Circuit,
    /// State the circuit should prepare from `|0…0⟩`, up to global phase.
    pub prepared_reference: StateVector,
    /// Euclidean norm of the caller's input before normalization.
    pub norm: f64,
}

#[derive(Clone, Copy)]
enum Axis {
    Y,
    Z,
}

impl Axis {
    fn gate(self, angle: f64) -> Gate {
        match self {
            Axis::Y => Gate::ry(angle),
            Axis::Z => Gate::rz(angle),
        }
    }
}

/// Uniformly controlled rotation: applies `R(angles[k])` to `target` when the
/// control register reads `k`, with `controls[0]` the most significant bit.
///
/// Uses the recursive CNOT decomposition, emitting `2^c` rotations and `2^c`
/// CNOTs for `c` controls (one fewer CNOT when `last` is false, in which case
/// the block is correct only up to a trailing `X` on the target conditioned
/// on the parity of the controls).
fn multiplexor(
    circuit: &mut Circuit,
    axis: Axis,
    angles: &[f64],
    controls: &[usize],
    target: usize,
    last: bool,
) -> Result<()> {
    let Some((&top, rest)) = controls.split_first() else {
        circuit.push_gate(axis.gate(angles[0]), &[target])?;
        return Ok(());
    };
    let half = angles.len() / 2;
    let (lo, hi) = angles.split_at(half);
    let sum: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (a + b) / 2.0).collect();
    let diff: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (a - b) / 2.0).collect();

    multiplexor(circuit, axis, &sum, rest, target, false)?;
    circuit.cx(top, target)?;
    let mut tail = Circuit::new(circuit.num_qubits(), 0);
    multiplexor(&mut tail, axis, &diff, rest, target, false)?;
    for inst in tail.instructions().iter().rev() {
        if let crate::circuit::Instruction::Gate { gate, targets, controls } = inst {
            circuit.push_controlled(gate.clone(), controls, targets)?;
        }
    }
    if last {
        circuit.cx(top, target)?;
    }
    Ok(())
}

/// Prepare the normalized `values` from `|0…0⟩`.
///
/// Qubits are disentangled from the least significant (last) one upward. At
/// each step the pair `(a, b)` sharing a control pattern is rotated to
/// `(r·e^{it}, 0)` with an `RZ(−φ)` then `RY(−θ)`, where `θ = 2·atan2(|b|, |a|)`,
/// `φ = arg b − arg a` and `t` is the mean phase. Pairs with `a = b = 0` get
/// zero angles. The loading circuit is the inverse of the result.
pub fn amplitude_load(values: &[C64]) -> Result<LoadPlan> {
    let n = log2_exact(values.len())?;
    let norm = values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("cannot load an all-zero vector".into()));
    }
    let reference = StateVector::normalized_from(values.to_vec())?;
    let mut disentangler = Circuit::new(n, 0);
    let mut current: Vec<C64> = reference.amplitudes().to_vec();

    for target in (0..n).rev() {
        let pairs = current.len() / 2;
        let mut theta = Vec::with_capacity(pairs);
        let mut phi = Vec::with_capacity(pairs);
        let mut next = Vec::with_capacity(pairs);
        for k in 0..pairs {
            let (a, b) = (current[2 * k], current[2 * k + 1]);
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if r == 0.0 {
                theta.push(0.0);
                phi.push(0.0);
                next.push(C64::new(0.0, 0.0));
                continue;
            }
            let (pa, pb) = (phase_or_zero(a), phase_or_zero(b));
            theta.push(2.0 * b.norm().atan2(a.norm()));
            phi.push(pb - pa);
            next.push(C64::from_polar(r, (pa + pb) / 2.0));
        }
        let controls: Vec<usize> = (0..target).collect();
        if phi.iter().any(|&p| p != 0.0) {
            let neg: Vec<f64> = phi.iter().map(|p| -p).collect();
            multiplexor(&mut disentangler, Axis::Z, &neg, &controls, target, true)?;
        }
        if theta.iter().any(|&t| t != 0.0) {
            let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
            multiplexor(&mut disentangler, Axis::Y, &neg, &controls, target, true)?;
        }
        current = next;
    }

    Ok(LoadPlan {
        target_qubits: n,
        circuit: disentangler.inverse()?,
        prepared_reference: reference,
        norm,
    })
}

/// Argument of `z`, taken as 0 when `z` is exactly zero so that a vanishing
/// amplitude contributes no phase.
fn phase_or_zero(z: C64) -> f64 {
    if z == C64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// Encode `bits` as `(1/√N) Σ_j |j⟩ ⊗ |bits[j]⟩` on `log2 N` address qubits
/// followed by one data qubit.
pub fn state_load(bits: &[bool]) -> Result<LoadPlan> {
    if bits.len() < 2 {
        return Err(Error::InvalidInput("state_load needs at least two bits".into()));
    }
    let address = log2_exact(bits.len())?;
    let n = address + 1;
    let data = address;
    let mut circuit = Circuit::new(n, 0);
    for q in 0..address {
        circuit.h(q)?;
    }
    let controls: Vec<usize> = (0..address).collect();
    if bits.iter().all(|&b| b) {
        circuit.x(data)?;
    } else {
        for (j, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            let zeros: Vec<usize> = (0..address).filter(|&q| j >> (address - 1 - q) & 1 == 0).collect();
            for &q in &zeros {
                circuit.x(q)?;
            }
            circuit.push_controlled(Gate::x(), &controls, &[data])?;
            for &q in &zeros {
                circuit.x(q)?;
            }
        }
    }

    let amp = C64::new(1.0 / (bits.len() as f64).sqrt(), 0.0);
    let mut reference = vec![C64::new(0.0, 0.0); 1 << n];
    for (j, &b) in bits.iter().enumerate() {
        reference[2 * j + usize::from(b)] = amp;
    }
    Ok(LoadPlan {
        target_qubits: n,
        circuit,
        prepared_reference: StateVector::from_amplitudes(reference)?,
        norm: 1.0,
    })
}

/// Run the plan's circuit from `|0…0⟩` and return the largest amplitude
/// deviation from the reference after global-phase alignment.
pub fn readback_verify(plan: &LoadPlan) -> Result<f64> {
    plan.circuit
        .run_from_zero()?
        .max_deviation_up_to_phase(&plan.prepared_reference)
}
