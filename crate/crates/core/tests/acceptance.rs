//! Acceptance criteria 1–10. Runs as a plain binary and prints one
//! `PASS`/`FAIL` line per criterion, followed by any failing checks.
//!
//! A failing check makes the target exit nonzero unless it is listed in
//! [`UNATTAINABLE`], in which case the criterion still reports `FAIL` but
//! the run succeeds. An unattainable check that starts passing is itself an
//! error, so the list cannot go stale.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use qfluid::circuit::deutsch_parallelism;
use qfluid::hamsim::{evolve_exact, evolve_trotter, HamiltonianTerm, TrotterOrder, TrotterPlan};
use qfluid::loading::{amplitude_load, state_load};
use qfluid::qft::{apply_qft, qft_circuit, QftSpec};
use qfluid::qlga::{
    continuum_compare, continuum_time_step, evolve, step, transport_residual, ContinuumRegime, GaussianPacket,
    Lattice1D, ScatteringParams,
};
use qfluid::rng::stream_rng;
use qfluid::tomography::{reconstruct_density, Reconstruction};
use qfluid::vqe::{build_poisson_operator, vqe_solve, vqe_solve_with, Ansatz, Hamiltonian, VqeConfig};
use qfluid::{Circuit, DensityMatrix, Gate, StateVector, C64};
use rand::Rng;

/// Checks that cannot pass as specified, keyed by criterion and check name.
/// The quoted analytic values for the QFT example are squared magnitudes.
/// The last is given as 0.138, but the transform of the normalized input has
/// `|β3|² = 1/12 ≈ 0.0833`, and the four quoted values sum to 1.055.
const UNATTAINABLE: &[(u32, &str)] = &[(5, "quoted |beta3|^2")];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        let pass = (value - target).abs() <= tol;
        self.check(name, pass, format!("{value:.6} vs {target} ± {tol:e}"));
    }

    fn below(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value < bound, format!("{value:.3e} < {bound:e}"));
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bell_circuit() -> Circuit {
    let mut circuit = Circuit::new(2, 0);
    circuit.h(0).unwrap().cx(0, 1).unwrap();
    circuit
}

fn not_gate_circuit() -> Circuit {
    let theta = 2.0 * 0.6f64.sqrt().acos();
    let mut circuit = Circuit::new(1, 1);
    circuit.push_gate(Gate::ry(theta), &[0]).unwrap();
    circuit.x(0).unwrap();
    circuit.measure(0, 0).unwrap();
    circuit
}

fn criterion_1(r: &mut Report) {
    let circuit = not_gate_circuit();
    let mut unitary = Circuit::new(1, 0);
    unitary.push_gate(Gate::ry(2.0 * 0.6f64.sqrt().acos()), &[0]).unwrap();
    unitary.x(0).unwrap();
    let p = unitary.run_from_zero().unwrap().probabilities();
    r.within("exact P(0)", p[0], 0.4, 1e-12);
    r.within("exact P(1)", p[1], 0.6, 1e-12);
    let hist = circuit.sample(&StateVector::zero_state(1).unwrap(), 8192, 7).unwrap();
    r.within("sampled P(0)", hist.probability("0"), 0.4, 0.02);
    r.within("sampled P(1)", hist.probability("1"), 0.6, 0.02);
}

fn criterion_2(r: &mut Report) {
    let values = [c(0., 1.), c(2., 1.), c(0., 2f64.sqrt()), c(1., 0.)];
    let plan = amplitude_load(&values).unwrap();
    let state = plan.circuit.run_from_zero().unwrap();
    let reference = StateVector::from_amplitudes(values.iter().map(|v| v / 3.0).collect()).unwrap();
    r.below("max |Δ| up to phase", state.max_deviation_up_to_phase(&reference).unwrap(), 1e-8);
    for (i, want) in [1.0 / 9.0, 5.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0].into_iter().enumerate() {
        r.within(&format!("P({i})"), state.probabilities()[i], want, 1e-10);
    }
    r.check(
        "gate count within 4·2^n",
        plan.circuit.gate_count() <= 4 * 4,
        format!("{} gates", plan.circuit.gate_count()),
    );
}

fn criterion_3(r: &mut Report) {
    let bits = [true, false, true, false];
    let plan = state_load(&bits).unwrap();
    let diag = DensityMatrix::from_pure(&plan.circuit.run_from_zero().unwrap()).diagonal();
    let mut read = Vec::new();
    for (address, &bit) in bits.iter().enumerate() {
        let (p0, p1) = (diag[2 * address], diag[2 * address + 1]);
        read.push(u8::from(p1 > p0));
        r.within(&format!("address {address} weight"), p0 + p1, 0.25, 1e-12);
        let wrong = if bit { p0 } else { p1 };
        r.below(&format!("address {address} wrong data"), wrong, 1e-12);
    }
    r.check("data qubit reads 1010", read == [1, 0, 1, 0], format!("{read:?}"));
}

fn bell_error(shots: u64, seed: u64) -> f64 {
    let exact = DensityMatrix::from_pure(&bell_circuit().run_from_zero().unwrap());
    reconstruct_density(&bell_circuit(), shots, seed).unwrap().rho.frobenius_distance(&exact)
}

fn criterion_4(r: &mut Report) {
    let rec: Reconstruction = reconstruct_density(&bell_circuit(), 8192, 11).unwrap();
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        r.within(&format!("rho[{i}{j}]"), rec.rho.get(i, j).re, 0.5, 0.05);
    }
    let block = [(1, 1), (1, 2), (2, 1), (2, 2)]
        .iter()
        .map(|&(i, j)| rec.rho.get(i, j).norm())
        .fold(0.0, f64::max);
    r.check("|01⟩,|10⟩ block ≤ 0.05", block <= 0.05, format!("max {block:.4}"));

    let shots = [100u64, 1_000, 10_000, 100_000];
    let seeds = 0..24u64;
    let points: Vec<(f64, f64)> = shots
        .iter()
        .map(|&s| {
            let mean = seeds.clone().map(|seed| bell_error(s, 1000 + seed)).sum::<f64>() / seeds.clone().count() as f64;
            ((s as f64).ln(), mean.ln())
        })
        .collect();
    let slope = least_squares_slope(&points);
    r.within("error slope vs shots", slope, -0.5, 0.1);
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

fn dft_matrix(dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |j, k| {
        C64::from_polar(1.0 / (dim as f64).sqrt(), 2.0 * PI * (j * k % dim) as f64 / dim as f64)
    })
}

fn criterion_5(r: &mut Report) {
    let w = c(0., 1.);
    let quoted = DMatrix::from_fn(4, 4, |j, k| w.powu((j * k) as u32) * 0.5);
    let unitary = qft_circuit(QftSpec::new(2)).unwrap().unitary().unwrap();
    r.below("n=2 unitary vs ω-matrix", (unitary - quoted).camax(), 1e-12);

    let input = StateVector::from_amplitudes(vec![c(0., 1. / 3.), c(2. / 3., 1. / 3.), c(0., 2f64.sqrt() / 3.), c(1. / 3., 0.)])
        .unwrap();
    let out = apply_qft(&input).unwrap();
    let oracle = dft_matrix(4) * input.to_column();
    let oracle_dev = out.amplitudes().iter().zip(oracle.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    r.below("output vs DFT oracle", oracle_dev, 1e-12);
    let magnitudes = out.probabilities();
    for (k, quoted) in [0.574, 0.037, 0.306, 0.138].into_iter().enumerate() {
        r.within(&format!("quoted |beta{k}|^2"), magnitudes[k], quoted, 1e-3);
    }

    let mut worst = 0.0f64;
    let dft = dft_matrix(16);
    let circuit = qft_circuit(QftSpec::new(4)).unwrap();
    for seed in 0..100 {
        let mut rng = stream_rng(seed, 5);
        let amps = (0..16).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let s = StateVector::normalized_from(amps).unwrap();
        let got = circuit.run_statevector(&s).unwrap();
        let want = &dft * s.to_column();
        worst = got.amplitudes().iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(worst, f64::max);
    }
    r.below("100 random 4-qubit states vs DFT", worst, 1e-10);
    for n in 1..=8 {
        let spec = QftSpec::new(n);
        let count = qft_circuit(spec).unwrap().gate_count();
        r.check(
            &format!("gate count n={n}"),
            count == n * (n + 1) / 2 + n / 2,
            format!("{count}"),
        );
    }
}

fn random_lattice(n: usize, seed: u64) -> Lattice1D {
    let mut rng = stream_rng(seed, 6);
    let mut draw = || -> Vec<C64> { (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect() };
    let (left, right) = (draw(), draw());
    let norm = left.iter().chain(&right).map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Lattice1D::from_channels(
        left.iter().map(|a| a / norm).collect(),
        right.iter().map(|a| a / norm).collect(),
        1.0,
        1.0,
    )
    .unwrap()
}

/// Dense `Â·Ŝ` on the `2·site + channel` layout with channel 0 left-moving.
fn dense_step(n: usize, params: &ScatteringParams) -> DMatrix<C64> {
    let (cp, is) = params.coefficients();
    let mut scatter = DMatrix::zeros(2 * n, 2 * n);
    let mut advect = DMatrix::zeros(2 * n, 2 * n);
    for s in 0..n {
        scatter[(2 * s, 2 * s)] = cp;
        scatter[(2 * s, 2 * s + 1)] = is;
        scatter[(2 * s + 1, 2 * s)] = is;
        scatter[(2 * s + 1, 2 * s + 1)] = cp;
        advect[(2 * ((s + n - 1) % n), 2 * s)] = c(1., 0.);
        advect[(2 * ((s + 1) % n) + 1, 2 * s + 1)] = c(1., 0.);
    }
    advect * scatter
}

fn criterion_6(r: &mut Report) {
    let params = ScatteringParams::with_angle(0.3);
    let start = random_lattice(256, 1);
    let end = evolve(&start, &params, 10_000);
    r.below("norm drift, N=256, 10^4 steps", (end.norm_sqr() - start.norm_sqr()).abs(), 1e-9);

    let mut worst = 0.0f64;
    for n in 1..=8 {
        for (k, p) in [0.3, PI / 4.0, 2.0].into_iter().enumerate() {
            let params = ScatteringParams::with_angle(p);
            let lat = random_lattice(n, 100 + 10 * n as u64 + k as u64);
            let dense = dense_step(n, &params) * nalgebra::DVector::from_vec(lat.flatten());
            let fast = step(&lat, &params).flatten();
            worst = dense.iter().zip(&fast).map(|(a, b)| (a - b).norm()).fold(worst, f64::max);
        }
    }
    r.below("step vs dense Â·Ŝ, N ≤ 8", worst, 1e-12);

    let residual = [random_lattice(64, 2), evolve(&random_lattice(64, 3), &params, 500)]
        .iter()
        .flat_map(|lat| transport_residual(lat, &params))
        .fold(0.0, f64::max);
    r.below("transport residual", residual, 1e-10);

    let packet = GaussianPacket {
        center: 0.5,
        width: 0.05,
    };
    let params = ScatteringParams::with_angle(PI / 4.0);
    let regime = ContinuumRegime::Schrodinger { diffusivity: 1.0 };
    let errors: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let dt = continuum_time_step(n, &params, regime).unwrap();
            let steps = (0.005 / dt).round() as usize;
            continuum_compare(&packet, n, &params, steps, regime).unwrap().l2_error
        })
        .collect();
    r.check(
        "continuum L2 error decreases over N = 64, 128, 256",
        errors[0] > errors[1] && errors[1] > errors[2],
        format!("{errors:?}"),
    );
}

fn max_dev(a: &StateVector, b: &StateVector) -> f64 {
    a.max_deviation(b).unwrap()
}

fn criterion_7(r: &mut Report) {
    let plus = StateVector::from_amplitudes(vec![c(FRAC_1_SQRT_2, 0.), c(0., FRAC_1_SQRT_2)]).unwrap();
    let start = plus.tensor(&plus).unwrap();
    let commuting = vec![
        HamiltonianTerm::pauli(0.7, "ZI".parse().unwrap()),
        HamiltonianTerm::pauli(-1.3, "ZZ".parse().unwrap()),
        HamiltonianTerm::pauli(0.4, "IZ".parse().unwrap()),
    ];
    let exact = evolve_exact(&commuting, 1.7, &start).unwrap();
    let mut worst = 0.0f64;
    for order in [TrotterOrder::First, TrotterOrder::Second] {
        for steps in [1, 3] {
            let plan = TrotterPlan::new(commuting.clone(), 1.7, steps, order).unwrap();
            worst = worst.max(max_dev(&evolve_trotter(&plan, &start).unwrap(), &exact));
        }
    }
    r.below("commuting terms exact", worst, 1e-12);

    let terms = vec![
        HamiltonianTerm::pauli(1.0, "X".parse().unwrap()),
        HamiltonianTerm::pauli(0.8, "Z".parse().unwrap()),
    ];
    let start = StateVector::zero_state(1).unwrap();
    let t = 1.0;
    let exact = evolve_exact(&terms, t, &start).unwrap();
    for (order, target) in [(TrotterOrder::First, -1.0), (TrotterOrder::Second, -2.0)] {
        let points: Vec<(f64, f64)> = (3..=10)
            .map(|k| {
                let steps = 1usize << k;
                let plan = TrotterPlan::new(terms.clone(), t, steps, order).unwrap();
                let err = (evolve_trotter(&plan, &start).unwrap().to_column() - exact.to_column()).norm();
                ((steps as f64).ln(), err.ln())
            })
            .collect();
        r.within(&format!("{order:?} order slope"), least_squares_slope(&points), target, 0.2);
    }
}

fn criterion_8(r: &mut Report) {
    let sys = build_poisson_operator(4, 1.0).unwrap();
    let h = sys.hamiltonian().unwrap();
    let exact = h.min_eigenvalue().unwrap();
    let res = vqe_solve(&h, &Ansatz::zeros(2, 2).unwrap(), 1e-10, 5000).unwrap();
    r.within("4×4 Poisson E_opt", res.energy, exact, 1e-3);
    let mut lowest_gap = res.min_evaluated_energy - exact;

    let z = Hamiltonian::pauli_sum(vec![(1.0, "Z".parse().unwrap())]).unwrap();
    let res = vqe_solve(&z, &Ansatz::zeros(1, 1).unwrap(), 1e-10, 2000).unwrap();
    r.within("H = Z energy", res.energy, -1.0, 1e-6);
    lowest_gap = lowest_gap.min(res.min_evaluated_energy + 1.0);

    for seed in 0..6 {
        let mut rng = stream_rng(seed, 8);
        let m = DMatrix::from_fn(4, 4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = Hamiltonian::dense((&m + m.adjoint()).unscale(2.0)).unwrap();
        let floor = h.min_eigenvalue().unwrap();
        let config = VqeConfig {
            seed,
            max_iterations: 2000,
            ..VqeConfig::default()
        };
        let res = vqe_solve_with(&h, &Ansatz::zeros(2, 2).unwrap(), &config).unwrap();
        lowest_gap = lowest_gap.min(res.min_evaluated_energy - floor);
    }
    r.check(
        "variational bound over all evaluations",
        lowest_gap >= -1e-9,
        format!("min(E_eval − E_min) = {lowest_gap:.3e}"),
    );
}

fn criterion_9(r: &mut Report) {
    let functions: [(&str, fn(bool) -> bool); 4] = [
        ("f=0", |_| false),
        ("f=1", |_| true),
        ("f=x", |x| x),
        ("f=¬x", |x| !x),
    ];
    for (name, f) in functions {
        let got = deutsch_parallelism(f).unwrap();
        let mut amps = vec![c(0., 0.); 4];
        for x in [false, true] {
            amps[2 * usize::from(x) + usize::from(f(x))] = c(FRAC_1_SQRT_2, 0.);
        }
        let want = StateVector::from_amplitudes(amps).unwrap();
        r.below(name, max_dev(&got, &want), 1e-12);
    }
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap().install(f)
}

fn criterion_10(r: &mut Report) {
    let not_gate = not_gate_circuit();
    let zero = StateVector::zero_state(1).unwrap();
    let base = not_gate.sample(&zero, 8192, 7).unwrap();
    let same_runs = (0..3).all(|_| not_gate.sample(&zero, 8192, 7).unwrap() == base);
    let same_workers = [1, 2, 4]
        .into_iter()
        .all(|w| not_gate.sample_with_workers(&zero, 8192, 7, w).unwrap() == base);
    r.check("sampling repeatable", same_runs, "");
    r.check("sampling across 1/2/4 workers", same_workers, "");

    let tomo = reconstruct_density(&bell_circuit(), 8192, 11).unwrap();
    let tomo_same = [1, 2, 4]
        .into_iter()
        .all(|w| in_pool(w, || reconstruct_density(&bell_circuit(), 8192, 11).unwrap()) == tomo);
    r.check("tomography across 1/2/4 workers", tomo_same, "");

    let err = bell_error(1000, 3);
    let slope_inputs_same = [1, 2, 4].into_iter().all(|w| in_pool(w, || bell_error(1000, 3)) == err);
    r.check("tomography error repeatable", slope_inputs_same, "");

    let sys = build_poisson_operator(4, 1.0).unwrap();
    let h = sys.hamiltonian().unwrap();
    let config = VqeConfig {
        shots: Some(1000),
        max_iterations: 100,
        seed: 9,
        ..VqeConfig::default()
    };
    let ansatz = Ansatz::zeros(2, 1).unwrap();
    let vqe = vqe_solve_with(&h, &ansatz, &config).unwrap();
    let vqe_same = [1, 2, 4]
        .into_iter()
        .all(|w| in_pool(w, || vqe_solve_with(&h, &ansatz, &config).unwrap()) == vqe);
    r.check("sampled VQE across 1/2/4 workers", vqe_same, "");
}

type Criterion = (u32, &'static str, fn(&mut Report), Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "NOT-gate demo", criterion_1, Duration::from_secs(1)),
        (2, "amplitude loading", criterion_2, Duration::from_secs(1)),
        (3, "state loading", criterion_3, Duration::from_secs(1)),
        (4, "Bell tomography", criterion_4, Duration::from_secs(10)),
        (5, "QFT", criterion_5, Duration::from_secs(5)),
        (6, "QLGA", criterion_6, Duration::from_secs(30)),
        (7, "Trotter", criterion_7, Duration::from_secs(10)),
        (8, "VQE", criterion_8, Duration::from_secs(30)),
        (9, "Deutsch parallelism", criterion_9, Duration::from_secs(1)),
        (10, "determinism", criterion_10, Duration::from_secs(30)),
    ];

    let mut unexpected = Vec::new();
    for (id, title, run, budget) in criteria {
        let mut report = Report::default();
        let started = Instant::now();
        run(&mut report);
        let elapsed = started.elapsed();
        report.check(
            "runtime",
            elapsed < budget,
            format!("{:.3}s < {}s", elapsed.as_secs_f64(), budget.as_secs()),
        );
        let pass = report.checks.iter().all(|c| c.pass);
        println!(
            "criterion {id:>2} {title:<22} {} ({:.3}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        for check in &report.checks {
            let listed = UNATTAINABLE.contains(&(id, check.name.as_str()));
            if !check.pass {
                let tag = if listed { "known unattainable" } else { "failed" };
                println!("    {tag}: {}: {}", check.name, check.detail);
                if !listed {
                    unexpected.push(format!("criterion {id}: {}", check.name));
                }
            } else if listed {
                println!("    unexpectedly passed: {}: {}", check.name, check.detail);
                unexpected.push(format!("criterion {id}: {} passed but is listed as unattainable", check.name));
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("acceptance failures:");
        for u in &unexpected {
            eprintln!("  {u}");
        }
        std::process::exit(1);
    }
}
