//! Quantum annealing on three spin-1 qutrits.
//!
//! The crate simulates the factorization of 15 by annealing three coupled
//! qutrits from a transverse-field ground state into the ground state of an
//! Ising-style cost Hamiltonian, and compiles every step of the discretized
//! evolution into sequences of transition-selective rotations, non-selective
//! rotations and dipole-dipole free-evolution intervals.
//!
//! Modules:
//!
//! * [`spinops`] — spin-1 generators, 27-dimensional embeddings, matrix
//!   exponentials, phase-insensitive comparison;
//! * [`hamiltonians`] — the model Hamiltonians and the integer cost
//!   spectrum;
//! * [`pulses`] — the pulse instruction set, its evaluator and serializers;
//! * [`compiler`] — term-by-term synthesis of the evolution operators;
//! * [`engine`] — schedule execution, fidelity, parameter sweeps;
//! * [`verify`] — the self-check suite behind the `verify` CLI command.
//!
//! All numeric code is generic over the real scalar via [`scalar::Real`];
//! the aliases below fix the default `f64` precision.
//!
//! ```
//! use qutrit_anneal::engine::{run, RunMode};
//! use qutrit_anneal::AnnealConfig;
//!
//! let result = run(&AnnealConfig::default(), RunMode::IDEAL).unwrap();
//! assert!(result.fidelity > 0.0 && result.fidelity < 1.0);
//! ```

pub mod compiler;
pub mod engine;
pub mod error;
pub mod hamiltonians;
pub mod linalg;
pub mod pulses;
pub mod scalar;
pub mod spinops;
pub mod verify;

pub use error::CoreError;
pub use scalar::Real;

/// Default-precision complex scalar.
pub type Complex64 = num_complex::Complex<f64>;
/// Default-precision 3x3 spin operator.
pub type SpinMatrix = spinops::SpinMatrix<f64>;
/// Default-precision 27x27 system operator.
pub type Operator27 = spinops::Operator27<f64>;
/// Default-precision state vector (27 amplitudes).
pub type StateVector = engine::StateVector<f64>;
/// Default-precision pulse program.
pub type PulseProgram = pulses::PulseProgram<f64>;
/// Default-precision schedule configuration.
pub type AnnealConfig = hamiltonians::AnnealConfig<f64>;
/// Default-precision run outcome.
pub type RunResult = engine::RunResult<f64>;
