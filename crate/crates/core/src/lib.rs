//! Statevector quantum simulation with a set of fluid-dynamics oriented
//! quantum algorithms built on top of it.
//!
//! The crate is organised bottom-up:
//!
//! - [`state`]: statevectors, Bloch coordinates, density matrices.
//! - [`gates`]: the gate set and strided gate application.
//! - [`circuit`]: circuits, execution, Born-rule shot sampling.
//! - [`loading`]: amplitude loading (multiplexed rotations) and state loading.
//! - [`tomography`]: Pauli expectations, POVMs, linear-inversion tomography.
//! - [`qft`]: quantum Fourier transform circuits and spectral derivatives.
//! - [`qlga`]: a one-dimensional quantum lattice-gas automaton.
//! - [`hamsim`]: exact and Trotterized Hamiltonian evolution, split-step Schrödinger.
//! - [`vqe`]: variational eigensolver and a Poisson/Stokes solve built on it.
//!
//! Basis indices are big-endian in qubit order: qubit 0 is the most
//! significant bit, so `|q0 q1 … q(n-1)⟩` reads left to right.

pub mod circuit;
pub mod error;
pub mod gates;
pub mod hamsim;
pub mod loading;
pub mod qft;
pub mod qlga;
pub mod rng;
pub mod state;
pub mod tomography;
pub mod vqe;

pub use circuit::{Circuit, Instruction, ShotHistogram};
pub use error::{Error, Result};
pub use gates::Gate;
pub use state::{BlochCoordinates, DensityMatrix, StateVector};

/// Complex amplitude type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Tolerance for analytic identities (unitarity, normalization after exact ops).
pub const ANALYTIC_TOL: f64 = 1e-10;
/// Tolerance applied when validating caller-supplied input.
pub const INPUT_TOL: f64 = 1e-8;
