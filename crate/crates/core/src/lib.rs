//! Simulation and training toolkit for parameterized quantum circuits.
//!
//! Shared types are re-exported at the crate root; the CLI and benches only
//! depend on this crate.

pub mod circuit;
pub mod error;
pub mod experiments;
pub mod gates;
pub mod iqp;
pub mod losses;
pub mod mps;
pub mod qsim;
pub mod train;

pub use circuit::{Angle, BqcSpec, CircuitBuilder, CircuitIR, Condition, Op, PriorPrep};
pub use error::{Error, Result};
pub use gates::{GateKind, NamedGate};
pub use iqp::{BlockSchedule, IqpCircuit, IqpLayer};
pub use losses::{KernelConfig, Loss};
pub use mps::{MpsOptions, MpsRun, TraceRow};
pub use qsim::{GateMatrix, MeasurementRecord, Shots, StateVector, C64};
pub use train::{GradientMode, TrainConfig, TrainRun};

/// Version string embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
