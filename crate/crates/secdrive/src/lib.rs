//! Simulation library for a secant-pulse-driven spin, an exactly solvable
//! time-dependent quantum model.
//!
//! The drive is `H(t) = Ω_x(t) (J_x - ½ sec(ϑ(t)) J_z)` with a secant-shaped
//! `Ω_z` component that diverges at the pulse edges. The library provides
//!
//! - spin-j operator algebra ([`algebra`]): angular-momentum matrices, matrix
//!   exponential, Hermitian eigensolver;
//! - the model itself ([`model`]): Hamiltonian, gauge transformation,
//!   dynamical invariant, Bloch-sphere trajectory, invariant eigenbasis in a
//!   smooth single-valued gauge;
//! - closed-form dynamics ([`analytic`]): the exact propagated state and the
//!   total/dynamical/geometric phase split, Berry connection and solid-angle
//!   geometry of the loop evolution;
//! - independent oracles ([`numerics`]): adaptive Runge-Kutta integration of
//!   the Schrödinger equation, adaptive quadrature, and a discrete-overlap
//!   (Pancharatnam product) geometric-phase estimator;
//! - the adiabaticity analysis ([`adiabaticity`]): instantaneous eigenframe,
//!   vanishing adiabatic connection, and the scanning-rate-independent
//!   violation of the adiabatic condition;
//! - reproducible sweep jobs ([`experiments`]) with deterministic CSV output.
//!
//! Every closed-form result is cross-checked against at least one oracle in
//! the test suite; the `acceptance` integration test runs the full battery.

pub mod adiabaticity;
pub mod algebra;
pub mod analytic;
pub mod experiments;
pub mod model;
pub mod numerics;

pub use algebra::{Operator, Spin, State};
pub use model::{BlochPoint, Envelope, PulseSpec};

/// Errors shared by all modules.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not Hermitian (max entrywise deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("invalid spin label j={0}: 2j must be a non-negative integer")]
    InvalidSpin(f64),
    #[error("invalid magnetic quantum number m={m} for j={j}")]
    InvalidQuantumNumber { j: f64, m: f64 },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("{op}: drive angle {angle:.9} rad is within the sec-pole guard (|angle| >= {guard:.9})")]
    Singularity {
        op: &'static str,
        angle: f64,
        guard: f64,
    },
    #[error("coordinate singularity: theta={0} lies on the polar axis")]
    CoordinateSingularity(f64),
    #[error("degenerate path: consecutive samples {0} and {1} coincide")]
    DegeneratePath(usize, usize),
    #[error("path too coarse: samples {index} and {next} are {separation:.3e} rad apart (limit 0.1)", next = .index + 1)]
    PathTooCoarse { index: usize, separation: f64 },
    #[error("step size underflow at t={t:.9e}: h={h:.3e} < h_min={h_min:.3e}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },
    #[error("integration exceeded max_steps={0}")]
    MaxStepsExceeded(usize),
    #[error("quadrature did not converge within {0} refinement levels")]
    NonConvergence(usize),
    #[error("overlap modulus {overlap:.4} between samples {index} and {next} below 0.9; sampling too coarse", next = .index + 1)]
    OverlapTooSmall { index: usize, overlap: f64 },
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sweep validation failed: {0}")]
    SweepValidation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
