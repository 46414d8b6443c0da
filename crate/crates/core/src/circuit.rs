//! Circuits, execution and Born-rule sampling.
//!
//! Measurements are terminal: a circuit may end with any number of
//! `measure` instructions but no gate may follow one. Sampling computes the
//! final statevector once and draws every shot from its exact distribution.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{apply_unchecked, validate_operands, Gate};
use crate::rng::stream_rng;
use crate::state::StateVector;
use crate::C64;

/// Shots drawn per RNG substream. Fixed so results do not depend on how
/// blocks are spread across worker threads.
pub const SHOT_BLOCK: u64 = 1024;

/// Largest register for which [`Circuit::unitary`] will build a dense matrix.
pub const MAX_DENSE_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Gate {
        gate: Gate,
        targets: Vec<usize>,
        controls: Vec<usize>,
    },
    Measure {
        qubit: usize,
        clbit: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr", into = "CircuitRepr")]
pub struct Circuit {
    num_qubits: usize,
    num_clbits: usize,
    instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(num_qubits: usize, num_clbits: usize) -> Self {
        Self {
            num_qubits,
            num_clbits,
            instructions: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> usize {
        self.num_clbits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// Number of gate instructions (measurements excluded).
    pub fn gate_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Gate { .. }))
            .count()
    }

    pub fn has_measurements(&self) -> bool {
        self.instructions
            .iter()
            .any(|i| matches!(i, Instruction::Measure { .. }))
    }

    pub fn push_gate(&mut self, gate: Gate, targets: &[usize]) -> Result<&mut Self> {
        self.push_controlled(gate, &[], targets)
    }

    pub fn push_controlled(&mut self, gate: Gate, controls: &[usize], targets: &[usize]) -> Result<&mut Self> {
        validate_operands(self.num_qubits, &gate, controls, targets)?;
        self.instructions.push(Instruction::Gate {
            gate,
            targets: targets.to_vec(),
            controls: controls.to_vec(),
        });
        Ok(self)
    }

    pub fn measure(&mut self, qubit: usize, clbit: usize) -> Result<&mut Self> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        if clbit >= self.num_clbits {
            return Err(Error::ClbitOutOfRange {
                index: clbit,
                num_clbits: self.num_clbits,
            });
        }
        let reused = self
            .instructions
            .iter()
            .any(|i| matches!(i, Instruction::Measure { clbit: c, .. } if *c == clbit));
        if reused {
            return Err(Error::ClbitReused(clbit));
        }
        self.instructions.push(Instruction::Measure { qubit, clbit });
        Ok(self)
    }

    pub fn h(&mut self, q: usize) -> Result<&mut Self> {
        self.push_gate(Gate::h(), &[q])
    }

    pub fn x(&mut self, q: usize) -> Result<&mut Self> {
        self.push_gate(Gate::x(), &[q])
    }

    pub fn cx(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.push_controlled(Gate::x(), &[control], &[target])
    }

    /// Append every instruction of `other`, which must have the same width.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: other.num_qubits,
            });
        }
        for inst in &other.instructions {
            match inst {
                Instruction::Gate {
                    gate,
                    targets,
                    controls,
                } => {
                    self.push_controlled(gate.clone(), controls, targets)?;
                }
                Instruction::Measure { qubit, clbit } => {
                    self.measure(*qubit, *clbit)?;
                }
            }
        }
        Ok(self)
    }

    /// Adjoint circuit: gates inverted in reverse order. Fails on measurements.
    pub fn inverse(&self) -> Result<Circuit> {
        let mut out = Circuit::new(self.num_qubits, self.num_clbits);
        for inst in self.instructions.iter().rev() {
            match inst {
                Instruction::Gate {
                    gate,
                    targets,
                    controls,
                } => out.instructions.push(Instruction::Gate {
                    gate: gate.inverse(),
                    targets: targets.clone(),
                    controls: controls.clone(),
                }),
                Instruction::Measure { .. } => return Err(Error::MeasurementInUnitaryRun),
            }
        }
        Ok(out)
    }

    fn check_initial(&self, initial: &StateVector) -> Result<()> {
        if initial.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: initial.num_qubits(),
            });
        }
        Ok(())
    }

    fn run_gates(&self, state: &mut StateVector, allow_terminal_measure: bool) -> Result<()> {
        let n = self.num_qubits;
        let mut measured = false;
        for inst in &self.instructions {
            match inst {
                Instruction::Gate {
                    gate,
                    targets,
                    controls,
                } => {
                    if measured {
                        return Err(Error::MidCircuitMeasurement);
                    }
                    apply_unchecked(state.amplitudes_mut(), n, gate, controls, targets);
                }
                Instruction::Measure { .. } if allow_terminal_measure => measured = true,
                Instruction::Measure { .. } => return Err(Error::MeasurementInUnitaryRun),
            }
        }
        Ok(())
    }

    /// Apply every gate in order to `initial`. Measurement instructions are an error.
    pub fn run_statevector(&self, initial: &StateVector) -> Result<StateVector> {
        self.check_initial(initial)?;
        let mut state = initial.clone();
        self.run_gates(&mut state, false)?;
        Ok(state)
    }

    /// Run from `|0…0⟩`.
    pub fn run_from_zero(&self) -> Result<StateVector> {
        self.run_statevector(&StateVector::zero_state(self.num_qubits)?)
    }

    /// Dense unitary of the circuit, column `k` being the image of `|k⟩`.
    pub fn unitary(&self) -> Result<DMatrix<C64>> {
        crate::state::check_capacity(self.num_qubits, MAX_DENSE_QUBITS)?;
        let dim = 1usize << self.num_qubits;
        let mut u = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let col = self.run_statevector(&StateVector::basis_state(self.num_qubits, k)?)?;
            u.set_column(k, &col.to_column());
        }
        Ok(u)
    }

    /// `(qubit, clbit)` readout map; all qubits in order when the circuit has no measurements.
    fn readout(&self) -> (usize, Vec<(usize, usize)>) {
        let pairs: Vec<(usize, usize)> = self
            .instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Measure { qubit, clbit } => Some((*qubit, *clbit)),
                _ => None,
            })
            .collect();
        if pairs.is_empty() {
            (self.num_qubits, (0..self.num_qubits).map(|q| (q, q)).collect())
        } else {
            (self.num_clbits, pairs)
        }
    }

    /// Draw `shots` terminal-measurement outcomes.
    ///
    /// Bitstrings list classical bits left to right starting at clbit 0. A
    /// circuit without measurement instructions reads out every qubit.
    pub fn sample(&self, initial: &StateVector, shots: u64, seed: u64) -> Result<ShotHistogram> {
        let (probs, width, readout) = self.sampling_setup(initial, shots)?;
        let counts = sample_counts(&probs, shots, seed);
        Ok(ShotHistogram::from_index_counts(&counts, self.num_qubits, width, &readout, shots, seed))
    }

    /// [`Circuit::sample`] on a dedicated pool of `workers` threads. The result
    /// is identical for every worker count.
    pub fn sample_with_workers(&self, initial: &StateVector, shots: u64, seed: u64, workers: usize) -> Result<ShotHistogram> {
        let (probs, width, readout) = self.sampling_setup(initial, shots)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let counts = pool.install(|| sample_counts(&probs, shots, seed));
        Ok(ShotHistogram::from_index_counts(&counts, self.num_qubits, width, &readout, shots, seed))
    }

    fn sampling_setup(&self, initial: &StateVector, shots: u64) -> Result<(Vec<f64>, usize, Vec<(usize, usize)>)> {
        if shots == 0 {
            return Err(Error::InvalidInput("shots must be at least 1".into()));
        }
        self.check_initial(initial)?;
        let mut state = initial.clone();
        self.run_gates(&mut state, true)?;
        let (width, readout) = self.readout();
        Ok((state.probabilities(), width, readout))
    }
}

/// Draw `shots` basis indices from `probabilities`, returning counts per index.
///
/// Shots are split into blocks of [`SHOT_BLOCK`]; block `b` draws from
/// substream `b` of `seed`, so the result is independent of thread count.
pub fn sample_counts(probabilities: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in probabilities {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let blocks = shots.div_ceil(SHOT_BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = SHOT_BLOCK.min(shots - b * SHOT_BLOCK);
            let mut rng = stream_rng(seed, b);
            let mut local = vec![0u64; probabilities.len()];
            for _ in 0..n {
                let u = rng.random::<f64>() * total;
                let idx = cdf.partition_point(|&c| c <= u).min(last_nonzero);
                local[idx] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; probabilities.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Outcome counts from a sampling run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotHistogram {
    pub shots: u64,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
}

impl ShotHistogram {
    fn from_index_counts(
        counts: &[u64],
        num_qubits: usize,
        width: usize,
        readout: &[(usize, usize)],
        shots: u64,
        seed: u64,
    ) -> Self {
        let mut map = BTreeMap::new();
        for (idx, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let mut bits = vec![b'0'; width];
            for &(q, c) in readout {
                if idx >> (num_qubits - 1 - q) & 1 == 1 {
                    bits[c] = b'1';
                }
            }
            *map.entry(String::from_utf8(bits).expect("ascii")).or_insert(0) += count;
        }
        Self {
            shots,
            seed,
            counts: map,
        }
    }

    pub fn count(&self, bitstring: &str) -> u64 {
        self.counts.get(bitstring).copied().unwrap_or(0)
    }

    pub fn probability(&self, bitstring: &str) -> f64 {
        self.count(bitstring) as f64 / self.shots as f64
    }

    /// CSV with header `bitstring,count,empirical_probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,count,empirical_probability\n");
        for (bits, count) in &self.counts {
            out.push_str(&format!("{bits},{count},{}\n", *count as f64 / self.shots as f64));
        }
        out
    }
}

/// Born probabilities of the nonzero-amplitude basis states.
pub fn born_probabilities(state: &StateVector) -> BTreeMap<usize, f64> {
    state
        .probabilities()
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .collect()
}

/// Evaluate `f` on both inputs at once: `H ⊗ I` on `|00⟩` followed by the
/// oracle `|q1, q2⟩ → |q1, q2 ⊕ f(q1)⟩`, realised as a basis permutation.
pub fn deutsch_parallelism(f: impl Fn(bool) -> bool) -> Result<StateVector> {
    let mut prep = Circuit::new(2, 0);
    prep.h(0)?;
    let superposed = prep.run_from_zero()?;
    superposed.permute_basis(|idx| {
        let q1 = idx >> 1 & 1 == 1;
        idx ^ usize::from(f(q1))
    })
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MeasureOp {
    Measure,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InstructionRecord {
    Measure {
        op: MeasureOp,
        qubit: usize,
        clbit: usize,
    },
    Gate {
        op: String,
        #[serde(default)]
        params: Vec<f64>,
        targets: Vec<usize>,
        #[serde(default)]
        controls: Vec<usize>,
    },
}

#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    num_qubits: usize,
    #[serde(default)]
    num_clbits: usize,
    instructions: Vec<InstructionRecord>,
}

impl TryFrom<CircuitRepr> for Circuit {
    type Error = Error;

    fn try_from(repr: CircuitRepr) -> Result<Self> {
        let mut circuit = Circuit::new(repr.num_qubits, repr.num_clbits);
        for record in repr.instructions {
            match record {
                InstructionRecord::Measure { qubit, clbit, .. } => {
                    circuit.measure(qubit, clbit)?;
                }
                InstructionRecord::Gate {
                    op,
                    params,
                    targets,
                    controls,
                } => {
                    circuit.push_controlled(Gate::builtin(&op, &params)?, &controls, &targets)?;
                }
            }
        }
        Ok(circuit)
    }
}

impl From<Circuit> for CircuitRepr {
    fn from(c: Circuit) -> Self {
        let instructions = c
            .instructions
            .into_iter()
            .map(|inst| match inst {
                Instruction::Gate {
                    gate,
                    targets,
                    controls,
                } => InstructionRecord::Gate {
                    op: gate.name().to_string(),
                    params: gate.params().to_vec(),
                    targets,
                    controls,
                },
                Instruction::Measure { qubit, clbit } => InstructionRecord::Measure {
                    op: MeasureOp::Measure,
                    qubit,
                    clbit,
                },
            })
            .collect();
        CircuitRepr {
            num_qubits: c.num_qubits,
            num_clbits: c.num_clbits,
            instructions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bell() -> Circuit {
        let mut circ = Circuit::new(2, 2);
        circ.h(0).unwrap().cx(0, 1).unwrap();
        circ
    }

    #[test]
    fn not_circuit_on_prepared_state() {
        let s = StateVector::from_amplitudes(vec![c(0.6f64.sqrt(), 0.), c(0.4f64.sqrt(), 0.)]).unwrap();
        let mut circ = Circuit::new(1, 1);
        circ.x(0).unwrap();
        let out = circ.run_statevector(&s).unwrap();
        let p = out.probabilities();
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn empty_and_involution_circuits() {
        let s = StateVector::from_amplitudes(vec![c(0.6, 0.), c(0., 0.8)]).unwrap();
        assert_eq!(Circuit::new(1, 0).run_statevector(&s).unwrap(), s);
        let mut hh = Circuit::new(1, 0);
        hh.h(0).unwrap().h(0).unwrap();
        let out = hh.run_from_zero().unwrap();
        assert!(out.max_deviation(&StateVector::zero_state(1).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn statevector_mode_rejects_measurement() {
        let mut circ = bell();
        circ.measure(0, 0).unwrap();
        assert_eq!(circ.run_from_zero(), Err(Error::MeasurementInUnitaryRun));
        circ.x(1).unwrap();
        let z = StateVector::zero_state(2).unwrap();
        assert_eq!(circ.sample(&z, 10, 0), Err(Error::MidCircuitMeasurement));
    }

    #[test]
    fn builder_validation() {
        let mut circ = Circuit::new(2, 1);
        assert!(circ.x(2).is_err());
        assert!(circ.measure(0, 1).is_err());
        circ.measure(0, 0).unwrap();
        assert_eq!(circ.measure(1, 0).unwrap_err(), Error::ClbitReused(0));
        let wrong = StateVector::zero_state(3).unwrap();
        assert!(matches!(bell().run_statevector(&wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn deterministic_sampling() {
        let mut circ = Circuit::new(1, 1);
        circ.x(0).unwrap().measure(0, 0).unwrap();
        let hist = circ.sample(&StateVector::zero_state(1).unwrap(), 500, 3).unwrap();
        assert_eq!(hist.count("1"), 500);
        assert_eq!(hist.counts.len(), 1);
    }

    #[test]
    fn bell_histogram() {
        let z = StateVector::zero_state(2).unwrap();
        let hist = bell().sample(&z, 8192, 11).unwrap();
        assert_eq!(hist.counts.values().sum::<u64>(), 8192);
        assert!((hist.probability("00") - 0.5).abs() < 0.03);
        assert!((hist.probability("11") - 0.5).abs() < 0.03);
        assert!(hist.probability("01") + hist.probability("10") <= 0.01);
    }

    #[test]
    fn readout_follows_measure_map() {
        // |10⟩ with qubit 0 read into clbit 1 and qubit 1 into clbit 0.
        let mut circ = Circuit::new(2, 3);
        circ.x(0).unwrap().measure(0, 1).unwrap().measure(1, 0).unwrap();
        let hist = circ.sample(&StateVector::zero_state(2).unwrap(), 4, 0).unwrap();
        assert_eq!(hist.count("010"), 4);
    }

    #[test]
    fn sampling_is_reproducible_across_workers() {
        let mut circ = Circuit::new(3, 0);
        circ.h(0).unwrap().h(1).unwrap().push_gate(Gate::u3(0.3, 0.2, 0.1), &[2]).unwrap();
        let z = StateVector::zero_state(3).unwrap();
        let base = circ.sample(&z, 10_000, 42).unwrap();
        for workers in [1, 2, 3, 8] {
            assert_eq!(circ.sample_with_workers(&z, 10_000, 42, workers).unwrap(), base);
        }
        assert_ne!(circ.sample(&z, 10_000, 43).unwrap(), base);
    }

    /// Pearson χ² test against the exact Born distribution. The critical value
    /// for 7 degrees of freedom at significance 0.001 is 24.322.
    #[test]
    fn chi_square_goodness_of_fit() {
        let mut circ = Circuit::new(3, 0);
        circ.push_gate(Gate::u3(1.1, 0.4, 2.0), &[0]).unwrap();
        circ.push_gate(Gate::u3(0.7, 1.4, 0.3), &[1]).unwrap();
        circ.push_gate(Gate::u3(2.0, 0.0, 1.0), &[2]).unwrap();
        circ.cx(0, 2).unwrap().cx(1, 0).unwrap();
        let z = StateVector::zero_state(3).unwrap();
        let exact = circ.run_from_zero().unwrap().probabilities();
        let shots = 20_000u64;
        let hist = circ.sample(&z, shots, 2024).unwrap();
        let chi2: f64 = exact
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let expected = p * shots as f64;
                let observed = hist.count(&format!("{i:03b}")) as f64;
                (observed - expected).powi(2) / expected
            })
            .sum();
        assert!(chi2 < 24.322, "chi2 = {chi2}");
        for (i, p) in exact.iter().enumerate() {
            let emp = hist.probability(&format!("{i:03b}"));
            assert!((emp - p).abs() <= 5.0 / (shots as f64).sqrt());
        }
    }

    #[test]
    fn born_probability_examples() {
        let s = StateVector::from_amplitudes(vec![c(0.6f64.sqrt(), 0.), c(0.4f64.sqrt(), 0.)]).unwrap();
        let p = born_probabilities(&s);
        assert!((p[&0] - 0.6).abs() < 1e-15 && (p[&1] - 0.4).abs() < 1e-15);
        let p = born_probabilities(&StateVector::basis_state(2, 3).unwrap());
        assert_eq!(p.into_iter().collect::<Vec<_>>(), vec![(3, 1.0)]);
        let amps = vec![c(0., 1.), c(2., 1.), c(0., 2f64.sqrt()), c(1., 0.)];
        let s = StateVector::normalized_from(amps).unwrap();
        let p = born_probabilities(&s);
        for (k, v) in [(0, 1.0 / 9.0), (1, 5.0 / 9.0), (2, 2.0 / 9.0), (3, 1.0 / 9.0)] {
            assert!((p[&k] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn deutsch_outputs() {
        let h = FRAC_1_SQRT_2;
        let expect = |a: usize, b: usize| {
            let mut v = vec![c(0., 0.); 4];
            v[a] = c(h, 0.);
            v[b] = c(h, 0.);
            StateVector::from_amplitudes(v).unwrap()
        };
        let cases: [(fn(bool) -> bool, usize, usize); 4] = [
            (|_| false, 0b00, 0b10),
            (|q| q, 0b00, 0b11),
            (|_| true, 0b01, 0b11),
            (|q| !q, 0b01, 0b10),
        ];
        for (f, a, b) in cases {
            let out = deutsch_parallelism(f).unwrap();
            assert!(out.max_deviation(&expect(a, b)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn json_schema() {
        let text = r#"{"num_qubits":2,"num_clbits":2,"instructions":[
            {"op":"H","targets":[0]},
            {"op":"X","params":[],"targets":[1],"controls":[0]},
            {"op":"PHASE","params":[0.5],"targets":[1]},
            {"op":"measure","qubit":0,"clbit":0}]}"#;
        let circ: Circuit = serde_json::from_str(text).unwrap();
        assert_eq!(circ.gate_count(), 3);
        assert!(circ.has_measurements());
        let round: Circuit = serde_json::from_str(&serde_json::to_string(&circ).unwrap()).unwrap();
        assert_eq!(round, circ);
        let value = serde_json::to_value(&circ).unwrap();
        assert_eq!(value["instructions"][1]["controls"], serde_json::json!([0]));
        assert_eq!(value["instructions"][3], serde_json::json!({"op":"measure","qubit":0,"clbit":0}));

        let bad = r#"{"num_qubits":1,"instructions":[{"op":"X","targets":[3]}]}"#;
        assert!(serde_json::from_str::<Circuit>(bad).is_err());
    }

    #[test]
    fn histogram_csv() {
        let hist = ShotHistogram {
            shots: 4,
            seed: 1,
            counts: [("0".to_string(), 1), ("1".to_string(), 3)].into_iter().collect(),
        };
        assert_eq!(hist.to_csv(), "bitstring,count,empirical_probability\n0,1,0.25\n1,3,0.75\n");
        assert_eq!(
            serde_json::to_value(&hist).unwrap(),
            serde_json::json!({"shots":4,"seed":1,"counts":{"0":1,"1":3}})
        );
    }

    #[test]
    fn inverse_undoes_circuit() {
        let mut circ = Circuit::new(3, 0);
        circ.h(0).unwrap().push_gate(Gate::u3(0.3, 1.0, 2.0), &[1]).unwrap();
        circ.push_controlled(Gate::phase(0.4), &[0], &[2]).unwrap();
        circ.push_gate(Gate::ry(0.9), &[2]).unwrap().push_gate(Gate::rz(-0.2), &[0]).unwrap();
        let mut round = circ.clone();
        round.append(&circ.inverse().unwrap()).unwrap();
        let out = round.run_from_zero().unwrap();
        assert!(out.max_deviation(&StateVector::zero_state(3).unwrap()).unwrap() < 1e-12);
    }
}
