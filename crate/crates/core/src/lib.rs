//! Fractal analysis of echo-state networks.
//!
//! Binary-driven reservoirs `x' = tanh(alpha * W x + beta * w_in u)` map the
//! space of input histories onto point clouds inside `(-1, 1)^m`. This crate
//! generates those clouds, measures their box-counting dimension, recasts
//! the arithmetic encoder as a one-unit reservoir, sweeps `(alpha, beta)`
//! grids and probes separability with an RBF-kernel SVM.
//!
//! Modules:
//!
//! * [`reservoir`]: state recursion, spectral normalization, contraction
//!   checks and labeled cloud generation.
//! * [`fractal`]: box counting, log-log slope fitting and the capacity bound.
//! * [`arith`]: arithmetic encoder/decoder as a recursive filter.
//! * [`svm`]: soft-margin RBF SVM trained with SMO.
//! * [`sweep`]: grid harness and rank-correlation trend report.
//! * [`io`]: JSON configuration documents and CSV schemas.

pub mod arith;
mod error;
pub mod fractal;
pub mod io;
pub mod reservoir;
pub mod seed;
pub mod stats;
pub mod svm;
pub mod sweep;

pub use error::{Error, Result};

pub use arith::{EncoderState, SymbolModel};
pub use fractal::{BoxCounter, BoxGrid, CapacityReport, FdEstimate, DEFAULT_EPSILONS};
pub use reservoir::{
    CloudParams, InputSequence, ReservoirConfig, StateCloud, StatePoint, Symbol,
};
pub use svm::{KernelParams, LabeledSet, SvmModel, TrainOptions};
pub use sweep::{SweepCell, SweepResult, SweepSpec, TrendReport};
