//! WebAssembly bindings behind `www/index.html`: oracle curves, a 2-D
//! gradient-surgery playground and a network trained step by step.

use mss_pinn::catalog::{self, MetricChannels};
use mss_pinn::harness::{compare, evaluate, oracle_for, Trainer, TrainingConfig};
use mss_pinn::pcgrad::{cosine_similarity, project_conflicting, TaskGradients};
use mss_pinn::{MssModel, TrajectoryTable};
use wasm_bindgen::prelude::*;

fn js(e: mss_pinn::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Trajectory in column form for plotting.
#[wasm_bindgen]
pub struct Curves {
    times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

#[wasm_bindgen]
impl Curves {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    pub fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.columns.get(c).cloned().unwrap_or_default()
    }
}

impl Curves {
    fn from_table(t: &TrajectoryTable) -> Self {
        Self {
            times: t.times.clone(),
            names: t.channels.clone(),
            columns: (0..t.channels.len()).map(|c| t.column(c)).collect(),
        }
    }
}

fn view(t: &TrajectoryTable, model: &MssModel, channels: MetricChannels) -> mss_pinn::Result<TrajectoryTable> {
    match channels {
        MetricChannels::States => Ok(t.clone()),
        MetricChannels::PerformanceRates => t.to_performance_channels(model),
    }
}

#[wasm_bindgen]
pub fn model_names() -> Vec<String> {
    catalog::MODEL_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Small browser-sized training setup for a catalog model.
pub fn demo_config(model: &str, pcgrad: bool, points: usize, seed: u64) -> mss_pinn::Result<TrainingConfig> {
    let mut cfg = TrainingConfig::from_preset(&catalog::preset(model)?.smoke());
    cfg.pcgrad = pcgrad;
    cfg.seed = seed;
    cfg.collocation.points = points;
    cfg.evaluation.points = 201;
    cfg.validate()?;
    Ok(cfg)
}

pub fn oracle_curves(model: &str) -> mss_pinn::Result<TrajectoryTable> {
    let cfg = demo_config(model, true, 2, 0)?;
    let m = cfg.build_model()?;
    view(&oracle_for(&cfg, &m)?, &m, cfg.channels)
}

/// RK4 solution of a catalog model on its preset range.
#[wasm_bindgen]
pub fn solve(model: &str) -> Result<Curves, JsError> {
    oracle_curves(model).map(|t| Curves::from_table(&t)).map_err(js)
}

/// Gradient surgery on two 2-D task gradients. Returns
/// `[p1x, p1y, p2x, p2y, update_x, update_y, cos]`, with `cos` NaN for a zero vector.
#[wasm_bindgen]
pub fn pcgrad_2d(g1x: f64, g1y: f64, g2x: f64, g2y: f64) -> Vec<f64> {
    let g1 = vec![g1x, g1y];
    let g2 = vec![g2x, g2y];
    let cos = cosine_similarity(&g1, &g2).unwrap_or(f64::NAN);
    let grads = TaskGradients::unlabeled(vec![g1, g2]).expect("two equal-length tasks");
    let p = project_conflicting(&grads, 0);
    let mut out = Vec::with_capacity(7);
    for g in &p.projected {
        out.extend_from_slice(g);
    }
    out.extend_from_slice(&p.update);
    out.push(cos);
    out
}

/// A training run advanced from JavaScript in small batches.
#[wasm_bindgen]
pub struct Session {
    trainer: Trainer,
    oracle: TrajectoryTable,
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(model: &str, pcgrad: bool, points: usize, seed: u64) -> Result<Session, JsError> {
        Self::create(model, pcgrad, points, seed).map_err(js)
    }

    /// Runs `n` iterations; returns `[iteration, L_u, L_f, total, cos_uf]`
    /// of the last one (`cos_uf` NaN when undefined).
    pub fn step(&mut self, n: usize) -> Result<Vec<f64>, JsError> {
        let mut last = Vec::new();
        for _ in 0..n {
            let r = self.trainer.step().map_err(js)?;
            last = vec![r.iteration as f64, r.loss_u, r.loss_f, r.total, r.cos_uf.unwrap_or(f64::NAN)];
        }
        Ok(last)
    }

    pub fn iteration(&self) -> usize {
        self.trainer.iteration()
    }

    pub fn prediction(&self) -> Result<Curves, JsError> {
        self.predicted().map(|t| Curves::from_table(&t)).map_err(js)
    }

    pub fn oracle(&self) -> Result<Curves, JsError> {
        let cfg = self.trainer.config();
        view(&self.oracle, self.trainer.model(), cfg.channels).map(|t| Curves::from_table(&t)).map_err(js)
    }

    /// Pooled RMSE of the current network against the oracle.
    pub fn rmse(&self) -> Result<f64, JsError> {
        self.score().map_err(js)
    }
}

impl Session {
    pub fn create(model: &str, pcgrad: bool, points: usize, seed: u64) -> mss_pinn::Result<Session> {
        let cfg = demo_config(model, pcgrad, points, seed)?;
        let m = cfg.build_model()?;
        let oracle = oracle_for(&cfg, &m)?;
        Ok(Session {
            trainer: Trainer::with_model(cfg, m)?,
            oracle,
        })
    }

    fn predicted(&self) -> mss_pinn::Result<TrajectoryTable> {
        let cfg = self.trainer.config();
        let t = evaluate(&self.trainer.checkpoint(), self.trainer.model(), &cfg.evaluation)?;
        view(&t, self.trainer.model(), cfg.channels)
    }

    pub fn score(&self) -> mss_pinn::Result<f64> {
        let cfg = self.trainer.config();
        let t = evaluate(&self.trainer.checkpoint(), self.trainer.model(), &cfg.evaluation)?;
        Ok(compare(&t, &self.oracle, self.trainer.model(), cfg.channels, &[])?.rmse_overall)
    }

    pub fn advance(&mut self, n: usize) -> mss_pinn::Result<()> {
        for _ in 0..n {
            self.trainer.step()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_curves_per_model() {
        assert_eq!(oracle_curves("example1").unwrap().channels.len(), 3);
        assert_eq!(oracle_curves("example3").unwrap().channels.len(), 5);
    }

    #[test]
    fn conflicting_pair_is_projected() {
        let r = pcgrad_2d(1.0, 0.0, -1.0, 1.0);
        assert!(r[6] < 0.0);
        // Each projected gradient is orthogonal to the other task's original.
        assert!((r[1] - r[0]).abs() < 1e-15);
        assert!(r[2].abs() < 1e-15);
        assert_eq!(&r[4..6], &[r[0] + r[2], r[1] + r[3]]);
    }

    #[test]
    fn aligned_pair_is_untouched() {
        let r = pcgrad_2d(1.0, 0.5, 2.0, 0.1);
        assert_eq!(&r[..4], &[1.0, 0.5, 2.0, 0.1]);
    }

    #[test]
    fn session_improves() {
        let mut s = Session::create("example1", true, 50, 1).unwrap();
        let before = s.score().unwrap();
        s.advance(300).unwrap();
        assert_eq!(s.trainer.iteration(), 300);
        assert!(s.score().unwrap() < before);
    }
}
