//! Experiment orchestration: configuration, the training loop, checkpoints,
//! metrics against the oracle, reproductions and plots.

pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod train;

pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use config::{CustomModel, TaskGranularity, TrainingConfig, WeibullShapes};
pub use metrics::{compare, evaluate, MetricReport, RmseForm};
pub use plot::emit_plots;
pub use run::{
    oracle_for, resolve_example, run_reproduction, train, ReproduceOptions, Reproduction, ReproductionSummary,
    RunManifest, RunOutput,
};
pub use train::{run_training, LogRow, Trainer, TrainingRun};
