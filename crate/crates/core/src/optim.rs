//! Adam over flat parameter vectors and learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: usize,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    /// One descent step `θ ← θ − rate · m̂ / (√v̂ + ε)`.
    ///
    /// A non-finite gradient leaves parameters and moments untouched and
    /// reports divergence at the current step index.
    pub fn step(&mut self, params: &mut [f64], gradient: &[f64], rate: f64) -> Result<()> {
        if params.len() != self.m.len() || gradient.len() != self.m.len() {
            return Err(Error::contract(format!(
                "Adam state sized for {} parameters, got {} params / {} gradient entries",
                self.m.len(),
                params.len(),
                gradient.len()
            )));
        }
        if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                iteration: self.step,
                detail: format!("gradient entry {i} is {}", gradient[i]),
                last_checkpoint: None,
            });
        }
        if !(rate > 0.0) {
            return Err(Error::contract(format!("learning rate must be positive, got {rate}")));
        }
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        self.step += 1;
        let k = self.step as i32;
        let c1 = 1.0 - beta1.powi(k);
        let c2 = 1.0 - beta2.powi(k);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(gradient)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Rescales `gradient` in place so its Euclidean norm is at most `max_norm`.
pub fn clip_by_norm(gradient: &mut [f64], max_norm: f64) -> f64 {
    let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        gradient.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRateSchedule {
    Constant {
        rate: f64,
    },
    /// `final + (initial − final)(1 − k/total)^power`, held at `final` once
    /// `k ≥ total`.
    PolynomialDecay {
        initial_rate: f64,
        final_rate: f64,
        total_steps: usize,
        #[serde(default = "default_power")]
        power: f64,
    },
}

fn default_power() -> f64 {
    1.0
}

impl LearningRateSchedule {
    pub fn rate(&self, step: usize) -> f64 {
        match *self {
            LearningRateSchedule::Constant { rate } => rate,
            LearningRateSchedule::PolynomialDecay {
                initial_rate,
                final_rate,
                total_steps,
                power,
            } => {
                if step >= total_steps {
                    return final_rate;
                }
                let frac = 1.0 - step as f64 / total_steps as f64;
                final_rate + (initial_rate - final_rate) * frac.powf(power)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningRateSchedule::Constant { rate } if rate > 0.0 => Ok(()),
            LearningRateSchedule::PolynomialDecay {
                initial_rate,
                final_rate,
                total_steps,
                power,
            } if final_rate > 0.0 && initial_rate >= final_rate && total_steps > 0 && power > 0.0 => {
                Ok(())
            }
            _ => Err(Error::config(format!("invalid learning-rate schedule {self:?}"))),
        }
    }
}
