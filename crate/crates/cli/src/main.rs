use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use qfluid::hamsim::{
    evolve_exact, evolve_trotter, periodic_grid, split_step_frames, HamiltonianTerm, SplitStepProblem, TrotterOrder,
    TrotterPlan, MAX_EXACT_QUBITS,
};
use qfluid::loading::{amplitude_load, readback_verify};
use qfluid::qft::{inverse_qft_circuit, qft_circuit, QftSpec};
use qfluid::qlga::{
    mass_momentum, occupancy, step, transport_residual, GaussianPacket, Lattice1D, ScatteringParams,
};
use qfluid::rng::stream_rng;
use qfluid::tomography::{reconstruct_density_with, Reconstruction, TomographyConfig};
use qfluid::vqe::{build_poisson_operator, solve_stokes_vqe, vqe_solve_with, Ansatz, Hamiltonian, StokesConfig, VqeConfig};
use qfluid::{Circuit, StateVector};
use rand::Rng;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "qfluid", version, about = "Statevector simulation and quantum fluid-dynamics algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a circuit file and sample it, or print its final statevector.
    RunCircuit {
        file: PathBuf,
        #[arg(long, default_value_t = 1024)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the final statevector instead of sampling.
        #[arg(long)]
        statevector: bool,
        /// Sampling threads (0 uses the global pool).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write the histogram as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build an amplitude-loading circuit for a vector of values.
    LoadAmplitudes {
        /// JSON array of numbers or `[re, im]` pairs.
        #[arg(long)]
        values: PathBuf,
        /// Write the circuit file here instead of embedding it in the report.
        #[arg(long)]
        circuit_out: Option<PathBuf>,
    },
    /// Linear-inversion state tomography of the state a circuit prepares.
    Tomography {
        circuit: PathBuf,
        #[arg(long, default_value_t = 8192)]
        shots_per_basis: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Clip negative eigenvalues and renormalize.
        #[arg(long)]
        clip: bool,
        /// Allow registers above the default size limit.
        #[arg(long)]
        force: bool,
    },
    /// Quantum Fourier transform of a statevector file.
    Qft {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        inverse: bool,
        #[arg(long)]
        no_swaps: bool,
        /// Write the magnitude table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evolve a one-dimensional lattice-gas automaton.
    Qlga {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        steps: usize,
        /// Scattering angle in radians.
        #[arg(long)]
        p: f64,
        /// `gaussian:<center>,<width>` in units of the lattice length, or `random`.
        #[arg(long, default_value = "gaussian:0.5,0.05")]
        init: String,
        /// Fraction of the initial probability in the right movers.
        #[arg(long, default_value_t = 0.5)]
        right_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Record every `every`-th step in the time series.
        #[arg(long, default_value_t = 1)]
        every: usize,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Trotterized evolution under a sum of Hamiltonian terms.
    Trotter {
        /// JSON array of `{coefficient, pauli}` or `{coefficient, matrix, qubits}` terms.
        #[arg(long)]
        terms: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        order: u8,
        /// Initial statevector file (defaults to |0…0⟩).
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Split-step Fourier solution of the Schrödinger equation on a periodic grid.
    Schrodinger {
        #[arg(long)]
        grid: usize,
        /// JSON array of potential values, one per grid point (defaults to zero).
        #[arg(long)]
        potential: Option<PathBuf>,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Initial Gaussian `<center>,<width>,<wavenumber>` in domain units.
        #[arg(long, default_value = "0.5,0.05,0")]
        packet: String,
        #[arg(long, default_value_t = 1)]
        frame_every: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Variational ground-state search.
    Vqe {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        max_iterations: usize,
        /// Estimate energies from this many shots per Pauli string.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Variational solve of the discretized Stokes/Poisson channel problem.
    Stokes {
        #[arg(long)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid spacing (defaults to `1/(grid+1)` on the unit channel).
        #[arg(long)]
        spacing: Option<f64>,
        /// JSON array for the right-hand side (defaults to a unit forcing).
        #[arg(long)]
        rhs: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_csv(path: Option<&PathBuf>, text: &str) -> Result<()> {
    if let Some(path) = path {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn pairs(values: &[C64]) -> Vec<[f64; 2]> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Value64 {
    Real(f64),
    Complex([f64; 2]),
}

fn parse_floats(spec: &str, what: &str, count: usize) -> Result<Vec<f64>> {
    let values = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("invalid {what} `{spec}`"))?;
    if values.len() != count {
        bail!("{what} needs {count} comma-separated values, got `{spec}`");
    }
    Ok(values)
}

fn main() -> Result<()> {
    let output = match Cli::parse().command {
        Command::RunCircuit {
            file,
            shots,
            seed,
            statevector,
            workers,
            csv,
        } => {
            let circuit: Circuit = read_json(&file)?;
            let initial = StateVector::zero_state(circuit.num_qubits())?;
            if statevector {
                serde_json::to_value(circuit.run_statevector(&initial)?)?
            } else {
                let hist = if workers == 0 {
                    circuit.sample(&initial, shots, seed)?
                } else {
                    circuit.sample_with_workers(&initial, shots, seed, workers)?
                };
                write_csv(csv.as_ref(), &hist.to_csv())?;
                serde_json::to_value(hist)?
            }
        }
        Command::LoadAmplitudes { values, circuit_out } => {
            let raw: Vec<Value64> = read_json(&values)?;
            let values: Vec<C64> = raw
                .into_iter()
                .map(|v| match v {
                    Value64::Real(re) => C64::new(re, 0.0),
                    Value64::Complex([re, im]) => C64::new(re, im),
                })
                .collect();
            let plan = amplitude_load(&values)?;
            let max_deviation = readback_verify(&plan)?;
            let probabilities = plan.circuit.run_from_zero()?.probabilities();
            let mut report = json!({
                "max_deviation": max_deviation,
                "probabilities": probabilities,
                "gate_count": plan.circuit.gate_count(),
                "norm": plan.norm,
            });
            match circuit_out {
                Some(path) => fs::write(&path, serde_json::to_string_pretty(&plan.circuit)?)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => report["circuit"] = serde_json::to_value(&plan.circuit)?,
            }
            report
        }
        Command::Tomography {
            circuit,
            shots_per_basis,
            seed,
            clip,
            force,
        } => {
            let circuit: Circuit = read_json(&circuit)?;
            let config = TomographyConfig {
                clip,
                force,
                ..TomographyConfig::new(shots_per_basis, seed)
            };
            let rec = reconstruct_density_with(&circuit, &config)?;
            let rho = rec.rho.matrix();
            json!({
                "rho": (0..rho.nrows()).map(|i| (0..rho.ncols()).map(|j| [rho[(i, j)].re, rho[(i, j)].im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "stderr": (0..rec.stderr.nrows()).map(|i| rec.stderr.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                "method": Reconstruction::METHOD,
                "shots_per_basis": shots_per_basis,
                "seed": seed,
            })
        }
        Command::Qft {
            input,
            inverse,
            no_swaps,
            csv,
        } => {
            let state: StateVector = read_json(&input)?;
            let spec = QftSpec {
                num_qubits: state.num_qubits(),
                include_final_swaps: !no_swaps,
            };
            let circuit = if inverse { inverse_qft_circuit(spec)? } else { qft_circuit(spec)? };
            let out = circuit.run_statevector(&state)?;
            let mut table = String::from("index,magnitude,probability\n");
            for (k, a) in out.amplitudes().iter().enumerate() {
                table.push_str(&format!("{k},{},{}\n", a.norm(), a.norm_sqr()));
            }
            write_csv(csv.as_ref(), &table)?;
            json!({ "state": out, "gate_count": circuit.gate_count() })
        }
        Command::Qlga {
            sites,
            steps,
            p,
            init,
            right_fraction,
            seed,
            every,
            mass,
            csv,
        } => {
            let params = ScatteringParams::new(p, C64::new(1.0, 0.0))?;
            let d = 1.0 / sites as f64;
            let mut lattice = if let Some(rest) = init.strip_prefix("gaussian:") {
                let v = parse_floats(rest, "gaussian initial condition", 2)?;
                let packet = GaussianPacket {
                    center: v[0],
                    width: v[1],
                };
                Lattice1D::gaussian(sites, &packet, right_fraction, d, d)?
            } else if init == "random" {
                let mut rng = stream_rng(seed, 0);
                let mut draw = |w: f64| -> Vec<C64> {
                    (0..sites)
                        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * w)
                        .collect()
                };
                let (left, right) = (draw((1.0 - right_fraction).sqrt()), draw(right_fraction.sqrt()));
                let norm = left.iter().chain(&right).map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                Lattice1D::from_channels(
                    left.iter().map(|a| a / norm).collect(),
                    right.iter().map(|a| a / norm).collect(),
                    d,
                    d,
                )?
            } else {
                bail!("unknown initial condition `{init}`; use gaussian:<center>,<width> or random");
            };
            let every = every.max(1);
            let initial_norm = lattice.norm_sqr();
            let mut series = String::from("step,site,occupancy,mass_density,momentum_density\n");
            let mut max_drift: f64 = 0.0;
            let mut max_residual: f64 = 0.0;
            for t in 0..=steps {
                if t % every == 0 || t == steps {
                    let occ = occupancy(&lattice);
                    let (rho, mom) = mass_momentum(&lattice, mass, 1.0)?;
                    for site in 0..sites {
                        series.push_str(&format!("{t},{site},{},{},{}\n", occ[site], rho[site], mom[site]));
                    }
                }
                max_drift = max_drift.max((lattice.norm_sqr() - initial_norm).abs());
                if t < steps {
                    max_residual = transport_residual(&lattice, &params).into_iter().fold(max_residual, f64::max);
                    lattice = step(&lattice, &params);
                }
            }
            write_csv(csv.as_ref(), &series)?;
            json!({
                "sites": sites,
                "steps": steps,
                "p": p,
                "norm_drift": max_drift,
                "transport_residual_max": max_residual,
                "final_norm": lattice.norm_sqr(),
            })
        }
        Command::Trotter {
            terms,
            time,
            steps,
            order,
            initial,
        } => {
            let terms: Vec<HamiltonianTerm> = read_json(&terms)?;
            let order = TrotterOrder::try_from(order)?;
            let n = terms.iter().map(HamiltonianTerm::min_qubits).max().unwrap_or(1);
            let initial = match initial {
                Some(path) => read_json(&path)?,
                None => StateVector::zero_state(n)?,
            };
            let plan = TrotterPlan::new(terms.clone(), time, steps, order)?;
            let out = evolve_trotter(&plan, &initial)?;
            let mut report = json!({ "state": out, "order": order, "steps": steps, "time": time });
            if initial.num_qubits() <= MAX_EXACT_QUBITS {
                let exact = evolve_exact(&terms, time, &initial)?;
                report["error_vs_exact"] = json!(out.max_deviation(&exact)?);
                report["l2_error_vs_exact"] = json!((out.to_column() - exact.to_column()).norm());
            }
            report
        }
        Command::Schrodinger {
            grid,
            potential,
            time,
            steps,
            length,
            mass,
            packet,
            frame_every,
            csv,
        } => {
            let potential: Vec<f64> = match potential {
                Some(path) => read_json(&path)?,
                None => vec![0.0; grid],
            };
            let v = parse_floats(&packet, "packet", 3)?;
            let (center, width, wavenumber) = (v[0] * length, v[1] * length, v[2]);
            let xs = periodic_grid(length, grid);
            let initial = xs
                .iter()
                .map(|&x| {
                    let mut dx = x - center;
                    dx -= length * (dx / length).round();
                    C64::from_polar((-dx * dx / (4.0 * width * width)).exp(), wavenumber * x)
                })
                .collect();
            let problem = SplitStepProblem {
                length,
                mass,
                potential,
                initial,
            };
            let frames = split_step_frames(&problem, time, steps, frame_every.max(1))?;
            let dx = length / grid as f64;
            let mut table = String::from("step,time,x,density\n");
            for (s, psi) in &frames {
                let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx;
                for (x, a) in xs.iter().zip(psi) {
                    table.push_str(&format!("{s},{},{x},{}\n", time * *s as f64 / steps.max(1) as f64, a.norm_sqr() / norm));
                }
            }
            write_csv(csv.as_ref(), &table)?;
            let (_, last) = frames.last().expect("final frame");
            json!({ "frames": frames.len(), "final": pairs(last) })
        }
        Command::Vqe {
            hamiltonian,
            layers,
            tol,
            restarts,
            seed,
            max_iterations,
            shots,
        } => {
            let h: Hamiltonian = read_json(&hamiltonian)?;
            let config = VqeConfig {
                tolerance: tol,
                max_iterations,
                restarts,
                seed,
                shots,
                ..VqeConfig::default()
            };
            let ansatz = Ansatz::zeros(h.num_qubits(), layers)?;
            let res = vqe_solve_with(&h, &ansatz, &config)?;
            let mut report = json!({
                "E_opt": res.energy,
                "params": res.params,
                "trace": res.trace,
                "converged": res.converged,
                "evaluations": res.evaluations,
            });
            if h.num_qubits() <= 6 {
                report["exact_reference"] = json!(h.min_eigenvalue()?);
            }
            report
        }
        Command::Stokes {
            grid,
            layers,
            restarts,
            seed,
            spacing,
            rhs,
            csv,
        } => {
            let system = build_poisson_operator(grid, spacing.unwrap_or(1.0 / (grid as f64 + 1.0)))?;
            let rhs: Vec<f64> = match rhs {
                Some(path) => read_json(&path)?,
                None => system.rhs.clone(),
            };
            let mut config = StokesConfig {
                layers,
                ..StokesConfig::default()
            };
            config.vqe.restarts = restarts;
            config.vqe.seed = seed;
            let report = solve_stokes_vqe(&system.matrix, &rhs, &config)?;
            let direct = system
                .matrix
                .clone()
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&rhs))
                .context("singular operator")?;
            let mut table = String::from("index,x,velocity,direct\n");
            for (j, u) in report.solution.iter().enumerate() {
                table.push_str(&format!("{j},{},{u},{}\n", (j + 1) as f64 * system.spacing, direct[j]));
            }
            write_csv(csv.as_ref(), &table)?;
            let error = (nalgebra::DVector::from_column_slice(&report.solution) - &direct).norm() / direct.norm().max(f64::MIN_POSITIVE);
            json!({
                "solution": report.solution,
                "relative_residual": report.relative_residual,
                "relative_error_vs_direct": error,
                "converged": report.converged,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&output as &Value)?);
    Ok(())
}
