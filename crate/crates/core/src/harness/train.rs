//! The training loop.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointHeader};
use super::config::{TaskGranularity, TrainingConfig};
use crate::error::{Error, Result};
use crate::loss::{CollocationGrid, InitialConditionLoss, LossBreakdown, ResidualLoss, ResidualPart};
use crate::model::MssModel;
use crate::network::{
    backward_into, forward_batch_into, initialize_parameters, BackwardScratch, BatchForward, LossEvaluator,
    NetworkParameters,
};
use crate::optim::{clip_by_norm, AdamState};
use crate::pcgrad::{cosine_similarity, project_conflicting, TaskGradients};

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub loss_u: f64,
    pub loss_f: f64,
    pub total: f64,
    pub learning_rate: f64,
    /// Cosine between the `L_u` and `L_f` gradients; empty when either is zero.
    pub cos_uf: Option<f64>,
    pub projections: usize,
}

/// Losses at the current parameters and the update direction derived from them.
#[derive(Clone, Debug)]
pub struct StepEvaluation {
    pub losses: LossBreakdown,
    pub direction: Vec<f64>,
    pub cos_uf: Option<f64>,
    pub projections: usize,
}

/// Training state that can be advanced one iteration at a time.
pub struct Trainer {
    config: TrainingConfig,
    model: MssModel,
    grid: CollocationGrid,
    ic: InitialConditionLoss,
    residual: ResidualLoss,
    params: NetworkParameters,
    adam: AdamState,
    iteration: usize,
    fwd0: BatchForward,
    fwd: BatchForward,
    scratch0: BackwardScratch,
    scratch: BackwardScratch,
}

fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    (seed ^ 0x5851_F42D_4C95_7F2D).wrapping_add((iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl Trainer {
    pub fn new(config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        let model = config.build_model()?;
        Self::with_model(config, model)
    }

    /// Uses `model` in place of the one named by the config.
    pub fn with_model(config: TrainingConfig, model: MssModel) -> Result<Self> {
        config.validate()?;
        let grid = CollocationGrid::new(config.collocation)?;
        let arch = config.architecture(model.num_states())?;
        let params = initialize_parameters(&arch, config.seed)?;
        let adam = AdamState::new(params.len(), config.adam);
        Ok(Self {
            ic: InitialConditionLoss::new(&model),
            residual: ResidualLoss::new(&model, &grid),
            config,
            model,
            grid,
            params,
            adam,
            iteration: 0,
            fwd0: BatchForward::default(),
            fwd: BatchForward::default(),
            scratch0: BackwardScratch::default(),
            scratch: BackwardScratch::default(),
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn model(&self) -> &MssModel {
        &self.model
    }

    pub fn params(&self) -> &NetworkParameters {
        &self.params
    }

    pub fn t_scale(&self) -> f64 {
        self.grid.t_scale()
    }

    /// Optimiser steps taken so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn pull_back(&mut self, initial: bool, seed_u: &Array2<f64>, seed_du: &Array2<f64>) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.params.len()];
        let (fwd, scratch) = if initial {
            (&self.fwd0, &mut self.scratch0)
        } else {
            (&self.fwd, &mut self.scratch)
        };
        backward_into(&self.params, fwd, seed_u, seed_du, scratch, &mut g)?;
        Ok(g)
    }

    /// Losses at the current parameters and the update direction.
    pub fn evaluate_step(&mut self) -> Result<StepEvaluation> {
        forward_batch_into(&self.params, self.ic.inputs(), &mut self.fwd0)?;
        let (loss_u, seed_u) = self.ic.value_and_seed(self.fwd0.u.view());
        let zero = Array2::zeros(self.fwd0.du.dim());
        let g_u = self.pull_back(true, &seed_u, &zero)?;

        forward_batch_into(&self.params, self.residual.inputs(), &mut self.fwd)?;
        let res = self.residual.residuals(self.fwd.u.view(), self.fwd.du.view())?;
        let k = self.model.num_states();
        let weight = if self.config.pcgrad { 1.0 } else { self.config.weight };
        let losses = LossBreakdown {
            loss_u,
            loss_f: res.total,
            per_state_f: res.per_state.clone(),
            weight,
            total: loss_u + weight * res.total,
        };

        let per_state = self.config.pcgrad && self.config.task_granularity == TaskGranularity::PerState;
        let residual_grads: Vec<Vec<f64>> = if per_state {
            let mut out = Vec::with_capacity(k);
            for c in 0..k {
                let (du, ddu) = self.residual.seeds(&res, ResidualPart::State(c));
                out.push(self.pull_back(false, &du, &ddu)?);
            }
            out
        } else {
            let (du, ddu) = self.residual.seeds(&res, ResidualPart::All);
            vec![self.pull_back(false, &du, &ddu)?]
        };
        let g_f: Vec<f64> = if residual_grads.len() == 1 {
            residual_grads[0].clone()
        } else {
            TaskGradients::unlabeled(residual_grads.clone())?.sum()
        };
        let cos_uf = cosine_similarity(&g_u, &g_f);

        let (direction, projections) = if self.config.pcgrad {
            let mut grads = vec![g_u];
            let mut labels = vec!["loss_u".to_string()];
            labels.extend((0..residual_grads.len()).map(|c| {
                if per_state { format!("loss_f[{c}]") } else { "loss_f".to_string() }
            }));
            grads.extend(residual_grads);
            let tasks = TaskGradients::new(grads, labels)?;
            let p = project_conflicting(&tasks, iteration_seed(self.config.seed, self.iteration));
            (p.update, p.projections)
        } else {
            let d = g_u.iter().zip(&g_f).map(|(a, b)| a + weight * b).collect();
            (d, 0)
        };
        Ok(StepEvaluation {
            losses,
            direction,
            cos_uf,
            projections,
        })
    }

    fn divergence(&self, detail: String, last_checkpoint: Option<PathBuf>) -> Error {
        Error::Divergence {
            iteration: self.iteration,
            detail,
            last_checkpoint,
        }
    }

    /// Evaluates the losses, applies one update and returns the log row of
    /// the pre-update losses.
    pub fn step(&mut self) -> Result<LogRow> {
        self.step_inner(None)
    }

    fn step_inner(&mut self, last_checkpoint: Option<&Path>) -> Result<LogRow> {
        let eval = self.evaluate_step()?;
        let row = self.log_row(&eval)?.ok_or_else(|| {
            self.divergence(
                format!("non-finite loss (L_u = {}, L_f = {})", eval.losses.loss_u, eval.losses.loss_f),
                last_checkpoint.map(Path::to_path_buf),
            )
        })?;
        let mut direction = eval.direction;
        if let Some(c) = self.config.clip_norm {
            clip_by_norm(&mut direction, c);
        }
        let rate = row.learning_rate;
        self.adam
            .step(self.params.values_mut(), &direction, rate)
            .map_err(|e| match e {
                Error::Divergence { detail, .. } => {
                    self.divergence(detail, last_checkpoint.map(Path::to_path_buf))
                }
                other => other,
            })?;
        self.iteration += 1;
        Ok(row)
    }

    fn log_row(&self, eval: &StepEvaluation) -> Result<Option<LogRow>> {
        let l = &eval.losses;
        if !(l.loss_u.is_finite() && l.loss_f.is_finite()) {
            return Ok(None);
        }
        Ok(Some(LogRow {
            iteration: self.iteration,
            loss_u: l.loss_u,
            loss_f: l.loss_f,
            total: l.total,
            learning_rate: self.config.schedule.rate(self.iteration),
            cos_uf: eval.cos_uf,
            projections: eval.projections,
        }))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                architecture: self.params.architecture().clone(),
                model: self.model.name().to_string(),
                iteration: self.iteration,
                seed: self.config.seed,
                t_scale: self.grid.t_scale(),
                config_digest: self.config.digest(),
            },
            params: self.params.clone(),
        }
    }
}

/// Result of a complete training run.
#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub final_checkpoint: Checkpoint,
    pub final_loss: LossBreakdown,
    pub log: Vec<LogRow>,
    pub checkpoints: Vec<PathBuf>,
    pub log_path: Option<PathBuf>,
}

/// Runs `config.iterations` updates. Log rows are taken at iteration 0, every
/// `log_interval` iterations and after the last update; checkpoints every
/// `checkpoint_interval` updates and at the end, when an output directory is
/// configured.
pub fn run_training(config: &TrainingConfig) -> Result<TrainingRun> {
    let trainer = Trainer::new(config.clone())?;
    run_trainer(trainer)
}

pub fn run_trainer(mut trainer: Trainer) -> Result<TrainingRun> {
    let config = trainer.config.clone();
    let out = config.output_dir.as_ref().map(PathBuf::from);
    let mut log = Vec::new();
    let mut checkpoints: Vec<PathBuf> = Vec::new();
    let log_path = out.as_ref().map(|d| d.join("training_log.csv"));

    let result = (|| -> Result<LossBreakdown> {
        while trainer.iteration < config.iterations {
            let it = trainer.iteration;
            let row = trainer.step_inner(checkpoints.last().map(PathBuf::as_path))?;
            if it.is_multiple_of(config.log_interval) {
                log.push(row);
            }
            if let Some(dir) = &out {
                if trainer.iteration.is_multiple_of(config.checkpoint_interval) && trainer.iteration < config.iterations {
                    let path = dir.join(format!("checkpoint_{:07}.ckpt", trainer.iteration));
                    trainer.checkpoint().save(&path)?;
                    checkpoints.push(path);
                }
            }
        }
        let eval = trainer.evaluate_step()?;
        let row = trainer.log_row(&eval)?.ok_or_else(|| {
            trainer.divergence("non-finite loss after the last update".into(), checkpoints.last().cloned())
        })?;
        log.push(row);
        Ok(eval.losses)
    })();

    if let Some(path) = &log_path {
        write_log(&log, path)?;
    }
    let final_loss = result?;
    let final_checkpoint = trainer.checkpoint();
    if let Some(dir) = &out {
        let path = dir.join(format!("checkpoint_{:07}.ckpt", trainer.iteration));
        final_checkpoint.save(&path)?;
        checkpoints.push(path);
    }
    Ok(TrainingRun {
        final_checkpoint,
        final_loss,
        log,
        checkpoints,
        log_path,
    })
}

/// `iteration,loss_u,loss_f,total,learning_rate,cos_uf,projections`.
pub fn write_log(rows: &[LogRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "loss_u", "loss_f", "total", "learning_rate", "cos_uf", "projections"])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            crate::trajectory::fmt17(r.loss_u),
            crate::trajectory::fmt17(r.loss_f),
            crate::trajectory::fmt17(r.total),
            crate::trajectory::fmt17(r.learning_rate),
            r.cos_uf.map(crate::trajectory::fmt17).unwrap_or_default(),
            r.projections.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
