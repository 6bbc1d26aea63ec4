//! The two loss groups of the MSS physics-informed network:
//!
//! * `L_u = Σᵢ (uᵢ(τ=0) − s₀ⁱ)²`, the initial-condition loss;
//! * `L_f = (1/N) Σ_t ‖(1/T) du/dτ − u Q(t)‖²`, the Kolmogorov residual over
//!   the collocation points, with `τ = t / T`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MssModel, RateMatrix};
use crate::network::{forward_batch, loss_value, LossEvaluator, LossSeeds, NetworkParameters};

/// Equally spaced, endpoint-inclusive time grid description.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(t_start: f64, t_end: f64, points: usize) -> Self {
        Self {
            t_start,
            t_end,
            points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::config("a grid needs at least two points"));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return Err(Error::config(format!(
                "grid interval [{}, {}] is empty or not finite",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    /// `linspace(t_start, t_end, points)` with both endpoints exact.
    pub fn times(&self) -> Vec<f64> {
        let n = self.points;
        let step = (self.t_end - self.t_start) / (n - 1) as f64;
        let mut ts: Vec<f64> = (0..n).map(|i| self.t_start + i as f64 * step).collect();
        ts[n - 1] = self.t_end;
        ts
    }
}

/// Collocation points and the time scale `T` used to normalise network input.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationGrid {
    spec: GridSpec,
    times: Vec<f64>,
}

impl CollocationGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        if spec.t_end <= 0.0 {
            return Err(Error::config("collocation interval must end after t = 0"));
        }
        Ok(Self {
            times: spec.times(),
            spec,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Normalisation constant: the upper end of the training interval.
    pub fn t_scale(&self) -> f64 {
        self.spec.t_end
    }
}

/// Initial-condition loss evaluated at `τ = 0`.
pub struct InitialConditionLoss {
    target: Vec<f64>,
    input: [f64; 1],
}

impl InitialConditionLoss {
    pub fn new(model: &MssModel) -> Self {
        Self {
            target: model.initial_distribution().to_vec(),
            input: [0.0],
        }
    }

    pub fn value_and_seed(&self, u: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        let mut seed = Array2::zeros(u.dim());
        let mut value = 0.0;
        for (k, &s) in self.target.iter().enumerate() {
            let d = u[[0, k]] - s;
            value += d * d;
            seed[[0, k]] = 2.0 * d;
        }
        (value, seed)
    }
}

impl LossEvaluator for InitialConditionLoss {
    fn inputs(&self) -> &[f64] {
        &self.input
    }

    fn evaluate(&self, u: ArrayView2<'_, f64>, du: ArrayView2<'_, f64>) -> Result<LossSeeds> {
        if u.ncols() != self.target.len() {
            return Err(Error::contract("network outputs do not match the model's state count"));
        }
        let (value, d_u) = self.value_and_seed(u);
        Ok(LossSeeds {
            value,
            d_u,
            d_du: Array2::zeros(du.dim()),
        })
    }
}

/// Which part of the residual a loss covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualPart {
    All,
    State(usize),
}

/// Per-point Kolmogorov residuals of one network evaluation.
#[derive(Clone, Debug)]
pub struct Residuals {
    /// `r[i, k] = (1/T) du_k/dτ(τᵢ) − (u(τᵢ) Q(tᵢ))_k`.
    pub r: Array2<f64>,
    /// `Σ_k r[i,k]²` per point.
    pub point_sq: Vec<f64>,
    /// `L_f`.
    pub total: f64,
    /// `(1/N) Σᵢ r[i,k]²` per state.
    pub per_state: Vec<f64>,
}

/// Residual loss over an arbitrary set of collocation times. The reduction
/// over points always runs in ascending-time order, whatever order the times
/// were supplied in.
pub struct ResidualLoss {
    times: Vec<f64>,
    taus: Vec<f64>,
    t_scale: f64,
    generators: Vec<RateMatrix>,
    order: Vec<usize>,
    part: ResidualPart,
}

impl ResidualLoss {
    pub fn new(model: &MssModel, grid: &CollocationGrid) -> Self {
        Self::at_times(model, grid.times(), grid.t_scale())
    }

    pub fn at_times(model: &MssModel, times: &[f64], t_scale: f64) -> Self {
        let generators = if model.is_homogeneous() {
            vec![model.rate_matrix(0.0); times.len()]
        } else {
            times.iter().map(|&t| model.rate_matrix(t)).collect()
        };
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        Self {
            times: times.to_vec(),
            taus: times.iter().map(|t| t / t_scale).collect(),
            t_scale,
            generators,
            order,
            part: ResidualPart::All,
        }
    }

    /// Restricts the loss to one state's residual component.
    pub fn part(mut self, part: ResidualPart) -> Self {
        self.part = part;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_scale(&self) -> f64 {
        self.t_scale
    }

    pub fn residuals(&self, u: ArrayView2<'_, f64>, du: ArrayView2<'_, f64>) -> Result<Residuals> {
        let (n, k) = u.dim();
        if n != self.times.len() || du.dim() != (n, k) {
            return Err(Error::contract("network batch does not match the collocation set"));
        }
        if self.generators.first().is_some_and(|q| q.dim() != k) {
            return Err(Error::contract("network outputs do not match the model's state count"));
        }
        let inv_t = 1.0 / self.t_scale;
        let mut r = Array2::zeros((n, k));
        let mut flux = vec![0.0; k];
        let mut point_sq = vec![0.0; n];
        for i in 0..n {
            let ui = u.row(i);
            self.generators[i].left_mul_into(ui.as_slice().expect("row-major"), &mut flux);
            let mut sq = 0.0;
            for c in 0..k {
                let v = du[[i, c]] * inv_t - flux[c];
                r[[i, c]] = v;
                sq += v * v;
            }
            point_sq[i] = sq;
        }
        let inv_n = 1.0 / n as f64;
        let mut total = 0.0;
        let mut per_state = vec![0.0; k];
        for &i in &self.order {
            total += point_sq[i];
            for c in 0..k {
                per_state[c] += r[[i, c]] * r[[i, c]];
            }
        }
        per_state.iter_mut().for_each(|v| *v *= inv_n);
        Ok(Residuals {
            r,
            point_sq,
            total: total * inv_n,
            per_state,
        })
    }

    /// Seeds `(∂L/∂u, ∂L/∂(du/dτ))` for the selected residual part.
    pub fn seeds(&self, res: &Residuals, part: ResidualPart) -> (Array2<f64>, Array2<f64>) {
        let (n, k) = res.r.dim();
        let scale = 2.0 / n as f64;
        let inv_t = 1.0 / self.t_scale;
        let mut d_u = Array2::zeros((n, k));
        let mut d_du = Array2::zeros((n, k));
        let cols: Vec<usize> = match part {
            ResidualPart::All => (0..k).collect(),
            ResidualPart::State(c) => vec![c],
        };
        for i in 0..n {
            let q = &self.generators[i];
            for &c in &cols {
                let g = scale * res.r[[i, c]];
                d_du[[i, c]] = g * inv_t;
                // r_c = … − Σ_j u_j Q[j][c]
                for j in 0..k {
                    d_u[[i, j]] -= g * q.get(j, c);
                }
            }
        }
        (d_u, d_du)
    }
}

impl LossEvaluator for ResidualLoss {
    fn inputs(&self) -> &[f64] {
        &self.taus
    }

    fn evaluate(&self, u: ArrayView2<'_, f64>, du: ArrayView2<'_, f64>) -> Result<LossSeeds> {
        let res = self.residuals(u, du)?;
        if let ResidualPart::State(c) = self.part {
            if c >= u.ncols() {
                return Err(Error::contract(format!("no state {c} in a {}-state model", u.ncols())));
            }
        }
        let value = match self.part {
            ResidualPart::All => res.total,
            ResidualPart::State(c) => res.per_state[c],
        };
        let (d_u, d_du) = self.seeds(&res, self.part);
        Ok(LossSeeds { value, d_u, d_du })
    }
}

/// `L_u` for the current parameters.
pub fn initial_condition_loss(params: &NetworkParameters, model: &MssModel) -> Result<f64> {
    loss_value(params, &InitialConditionLoss::new(model))
}

/// `L_f` together with its per-point residuals.
pub fn residual_loss(
    params: &NetworkParameters,
    model: &MssModel,
    grid: &CollocationGrid,
) -> Result<Residuals> {
    let loss = ResidualLoss::new(model, grid);
    let fwd = forward_batch(params, loss.inputs())?;
    loss.residuals(fwd.u.view(), fwd.du.view())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub loss_u: f64,
    pub loss_f: f64,
    pub per_state_f: Vec<f64>,
    pub weight: f64,
    pub total: f64,
}

/// `L_u + W·L_f`.
pub fn combined_loss(
    params: &NetworkParameters,
    model: &MssModel,
    grid: &CollocationGrid,
    weight: f64,
) -> Result<LossBreakdown> {
    if !(weight > 0.0) {
        return Err(Error::config(format!("loss weight must be positive, got {weight}")));
    }
    let loss_u = initial_condition_loss(params, model)?;
    let res = residual_loss(params, model, grid)?;
    Ok(LossBreakdown {
        loss_u,
        loss_f: res.total,
        per_state_f: res.per_state,
        weight,
        total: loss_u + weight * res.total,
    })
}
