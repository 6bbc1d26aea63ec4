//! Complete runs: training plus evaluation against the oracle, with their
//! on-disk artifacts, and paired with/without-PCGrad reproductions.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{TaskGranularity, TrainingConfig};
use super::metrics::{compare, evaluate, MetricReport};
use super::plot::emit_plots;
use super::train::{run_trainer, Trainer, TrainingRun};
use crate::catalog::{self, default_internal_step, MetricChannels};
use crate::error::{Error, Result};
use crate::loss::LossBreakdown;
use crate::model::MssModel;
use crate::oracle::solve_rk4;
use crate::trajectory::TrajectoryTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainingConfig,
    pub config_digest: String,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub iterations: usize,
    pub final_loss: LossBreakdown,
    pub checkpoints: Vec<String>,
    pub training_log: Option<String>,
    pub trajectory: Option<String>,
    pub metrics: Option<MetricReport>,
}

pub struct RunOutput {
    pub manifest: RunManifest,
    pub training: TrainingRun,
    pub estimate: TrajectoryTable,
}

/// RK4 reference on the evaluation grid of `config`, which must start at 0.
pub fn oracle_for(config: &TrainingConfig, model: &MssModel) -> Result<TrajectoryTable> {
    let g = config.evaluation;
    if g.t_start != 0.0 {
        return Err(Error::config("oracle comparison needs an evaluation grid starting at t = 0"));
    }
    let h = default_internal_step(model.name(), g.t_end, g.points);
    solve_rk4(model, g.t_end, g.points, h)
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Trains, evaluates on the evaluation grid and, when `oracle` is given,
/// scores the result. Artifacts go to `config.output_dir` if set.
pub fn train(config: &TrainingConfig, oracle: Option<&TrajectoryTable>) -> Result<RunOutput> {
    let start = Instant::now();
    let model = config.build_model()?;
    let trainer = Trainer::with_model(config.clone(), model.clone())?;
    let training = run_trainer(trainer)?;
    let estimate = evaluate(&training.final_checkpoint, &model, &config.evaluation)?;
    if config.channels == MetricChannels::PerformanceRates && model.performance_rates().is_none() {
        return Err(Error::config("performance-rate metrics need a model with performance rates"));
    }
    let metrics = oracle
        .map(|o| compare(&estimate, o, &model, config.channels, &config.sub_ranges))
        .transpose()?;
    let out = config.output_dir.as_ref().map(PathBuf::from);
    let trajectory = match &out {
        Some(dir) => Some(estimate.save(dir, "trajectory")?.0),
        None => None,
    };
    let manifest = RunManifest {
        config: config.clone(),
        config_digest: config.digest(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        iterations: training.final_checkpoint.header.iteration,
        final_loss: training.final_loss.clone(),
        checkpoints: training.checkpoints.iter().map(|p| path_string(p)).collect(),
        training_log: training.log_path.as_deref().map(path_string),
        trajectory: trajectory.as_deref().map(path_string),
        metrics,
    };
    if let Some(dir) = &out {
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    }
    Ok(RunOutput {
        manifest,
        training,
        estimate,
    })
}

/// Accepts `1`, `ex1` or `example1`.
pub fn resolve_example(name: &str) -> Result<&'static str> {
    let n = name.trim_start_matches("example").trim_start_matches("ex");
    match n {
        "1" => Ok("example1"),
        "2" => Ok("example2"),
        "3" => Ok("example3"),
        _ => Err(Error::Lookup {
            kind: "example",
            name: name.to_string(),
        }),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReproduceOptions {
    pub smoke: bool,
    pub seed: Option<u64>,
    /// Run the two arms concurrently when at least 2.
    pub threads: usize,
    pub out_dir: Option<PathBuf>,
    pub task_granularity: TaskGranularity,
    /// Overrides the preset iteration count.
    pub iterations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub pcgrad: bool,
    pub config_digest: String,
    pub final_loss: LossBreakdown,
    pub metrics: MetricReport,
}

/// Deterministic summary of a reproduction; contains no timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproductionSummary {
    pub example: String,
    pub smoke: bool,
    pub seed: u64,
    pub with_pcgrad: ArmSummary,
    pub without_pcgrad: ArmSummary,
    /// Pooled RMSE without PCGrad divided by pooled RMSE with it.
    pub rmse_ratio: f64,
    pub rmse_ratio_channel_mean: f64,
}

pub struct Reproduction {
    pub summary: ReproductionSummary,
    pub with_pcgrad: RunOutput,
    pub without_pcgrad: RunOutput,
    pub oracle: TrajectoryTable,
}

/// The pair of arm configurations a reproduction trains.
pub fn reproduction_configs(example: &str, opts: &ReproduceOptions) -> Result<[TrainingConfig; 2]> {
    let name = resolve_example(example)?;
    let mut preset = catalog::preset(name)?;
    if opts.smoke {
        preset = preset.smoke();
    }
    let mut base = TrainingConfig::from_preset(&preset);
    if let Some(s) = opts.seed {
        base.seed = s;
    }
    if let Some(n) = opts.iterations {
        base.iterations = n;
    }
    base.task_granularity = opts.task_granularity;
    let arm = |pcgrad: bool| {
        let mut c = base.clone();
        c.pcgrad = pcgrad;
        c.weight = 1.0;
        c.output_dir = opts
            .out_dir
            .as_ref()
            .map(|d| path_string(&d.join(if pcgrad { "pcgrad" } else { "no_pcgrad" })));
        c
    };
    let configs = [arm(true), arm(false)];
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

pub fn run_reproduction(example: &str, opts: &ReproduceOptions) -> Result<Reproduction> {
    let [with_cfg, without_cfg] = reproduction_configs(example, opts)?;
    let model = with_cfg.build_model()?;
    let oracle = oracle_for(&with_cfg, &model)?;
    let (with_pcgrad, without_pcgrad) = if opts.threads >= 2 {
        std::thread::scope(|s| {
            let a = s.spawn(|| train(&with_cfg, Some(&oracle)));
            let b = train(&without_cfg, Some(&oracle));
            (a.join().expect("training thread panicked"), b)
        })
    } else {
        (train(&with_cfg, Some(&oracle)), train(&without_cfg, Some(&oracle)))
    };
    let (with_pcgrad, without_pcgrad) = (with_pcgrad?, without_pcgrad?);
    let arm = |r: &RunOutput| ArmSummary {
        pcgrad: r.manifest.config.pcgrad,
        config_digest: r.manifest.config_digest.clone(),
        final_loss: r.manifest.final_loss.clone(),
        metrics: r.manifest.metrics.clone().expect("scored against the oracle"),
    };
    let a = arm(&with_pcgrad);
    let b = arm(&without_pcgrad);
    let summary = ReproductionSummary {
        example: model.name().to_string(),
        smoke: opts.smoke,
        seed: with_cfg.seed,
        rmse_ratio: b.metrics.rmse_overall / a.metrics.rmse_overall,
        rmse_ratio_channel_mean: b.metrics.rmse_channel_mean / a.metrics.rmse_channel_mean,
        with_pcgrad: a,
        without_pcgrad: b,
    };
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        oracle.save(dir, "oracle")?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        let tables = [
            oracle.clone(),
            with_pcgrad.estimate.clone().with_label("pinn (pcgrad)"),
            without_pcgrad.estimate.clone().with_label("pinn (no pcgrad)"),
        ];
        let tables = match with_cfg.channels {
            MetricChannels::States => tables.to_vec(),
            MetricChannels::PerformanceRates => tables
                .iter()
                .map(|t| t.to_performance_channels(&model))
                .collect::<Result<Vec<_>>>()?,
        };
        emit_plots(&tables, &dir.join("plots"), model.name())?;
    }
    Ok(Reproduction {
        summary,
        with_pcgrad,
        without_pcgrad,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_names() {
        assert_eq!(resolve_example("1").unwrap(), "example1");
        assert_eq!(resolve_example("ex2").unwrap(), "example2");
        assert_eq!(resolve_example("example3").unwrap(), "example3");
        assert!(resolve_example("4").is_err());
    }

    #[test]
    fn arms_differ_only_in_pcgrad() {
        let opts = ReproduceOptions {
            smoke: true,
            ..Default::default()
        };
        let [a, b] = reproduction_configs("3", &opts).unwrap();
        assert!(a.pcgrad && !b.pcgrad);
        let mut b2 = b.clone();
        b2.pcgrad = true;
        assert_eq!(a, b2);
        assert_eq!(a.iterations, 4000);
        assert_eq!(a.collocation.points, 100);
    }
}
