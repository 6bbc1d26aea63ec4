//! Physics-informed neural network solver for the transient state
//! probabilities of multi-state systems modelled as continuous-time Markov
//! chains, trained with projected conflicting gradients.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: generators, the Kolmogorov right-hand side, validation and
//!   reliability aggregation.
//! - [`catalog`]: the three reference systems and their experiment presets.
//! - [`oracle`]: RK4 and closed-form reference solutions.
//! - [`network`]: the tanh/softmax network with input-derivative propagation
//!   and its adjoint.
//! - [`loss`]: initial-condition and residual losses.
//! - [`pcgrad`], [`optim`]: gradient surgery, Adam and learning-rate schedules.
//! - [`harness`]: training runs, checkpoints, metrics, reproductions and plots.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod harness;
pub mod loss;
pub mod model;
pub mod network;
pub mod oracle;
pub mod optim;
pub mod pcgrad;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{MssModel, RateMatrix, StateProbabilityVector};
pub use trajectory::{Provenance, TrajectoryTable};
