use qfluid::loading::amplitude_load;
use qfluid::qft::{qft_circuit, QftSpec};
use qfluid::tomography::{exact_reconstruction, reconstruct_density};
use qfluid::{Circuit, DensityMatrix, C64};

fn dft(values: &[C64]) -> Vec<C64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            values
                .iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64))
                .sum::<C64>()
                / (n as f64).sqrt()
        })
        .collect()
}

#[test]
fn load_then_transform_matches_classical_dft() {
    let values: Vec<C64> = (0..8).map(|j| C64::new((j as f64).cos(), 0.3 * j as f64)).collect();
    let plan = amplitude_load(&values).unwrap();
    let mut circuit = plan.circuit.clone();
    circuit.append(&qft_circuit(QftSpec::new(3)).unwrap()).unwrap();
    let out = circuit.run_from_zero().unwrap();

    let loaded = plan.circuit.run_from_zero().unwrap();
    let want = dft(loaded.amplitudes());
    let err = out.amplitudes().iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12);

    let norm = values.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let spectrum = dft(&values);
    for (p, s) in out.probabilities().iter().zip(&spectrum) {
        assert!((p - s.norm_sqr() / norm).abs() < 1e-12);
    }
}

#[test]
fn tomography_of_a_loaded_state() {
    let values = [C64::new(0.0, 1.0), C64::new(2.0, 1.0), C64::new(0.0, 2f64.sqrt()), C64::new(1.0, 0.0)];
    let plan = amplitude_load(&values).unwrap();
    let exact = DensityMatrix::from_pure(&plan.circuit.run_from_zero().unwrap());
    let noiseless = exact_reconstruction(&plan.circuit.run_from_zero().unwrap()).unwrap();
    assert!(noiseless.frobenius_distance(&exact) < 1e-12);
    let rec = reconstruct_density(&plan.circuit, 20_000, 4).unwrap();
    assert!(rec.rho.frobenius_distance(&exact) < 0.05);
}

#[test]
fn circuit_files_round_trip() {
    let plan = amplitude_load(&[C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.5, 0.5), C64::new(0.0, 0.0)]).unwrap();
    let text = serde_json::to_string(&plan.circuit).unwrap();
    let back: Circuit = serde_json::from_str(&text).unwrap();
    assert_eq!(back, plan.circuit);
    let a = back.run_from_zero().unwrap();
    assert!(a.max_deviation(&plan.circuit.run_from_zero().unwrap()).unwrap() == 0.0);
}
