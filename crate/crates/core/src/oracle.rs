//! Reference solutions of `p' = p Q(t)`: fixed-step classical RK4, the
//! closed form of the homogeneous propulsion module and a step-halving check.

use crate::error::{Error, Result};
use crate::loss::GridSpec;
use crate::model::{MssModel, StateProbabilityVector, PROBABILITY_TOL};
use crate::trajectory::{state_channels, Provenance, TrajectoryTable};

/// Per-step mass defect beyond which the step size is considered too large.
pub const STEP_DEFECT_LIMIT: f64 = 1e-6;

struct Rk4<'a> {
    model: &'a MssModel,
    fixed: Option<crate::model::RateMatrix>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(model: &'a MssModel) -> Self {
        let n = model.num_states();
        Self {
            model,
            fixed: model.is_homogeneous().then(|| model.rate_matrix(0.0)),
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    fn rhs(&self, t: f64, p: &[f64], out: &mut [f64]) {
        match &self.fixed {
            Some(q) => q.left_mul_into(p, out),
            None => self.model.rate_matrix(t).left_mul_into(p, out),
        }
    }

    fn step(&mut self, t: f64, h: f64, p: &mut [f64]) {
        let n = p.len();
        let half = 0.5 * h;
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        self.rhs(t, p, &mut k[0]);
        for i in 0..n {
            tmp[i] = p[i] + half * k[0][i];
        }
        self.rhs(t + half, &tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = p[i] + half * k[1][i];
        }
        self.rhs(t + half, &tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = p[i] + h * k[2][i];
        }
        self.rhs(t + h, &tmp, &mut k[3]);
        for i in 0..n {
            p[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        self.k = k;
        self.tmp = tmp;
    }
}

/// Integrates from `s₀` with step `internal_step`, emitting
/// `num_output_points` rows on `linspace(0, t_end)`. The step must divide
/// the output spacing (to within 1e-9 relative); it is then adjusted to the
/// exact quotient.
pub fn solve_rk4(
    model: &MssModel,
    t_end: f64,
    num_output_points: usize,
    internal_step: f64,
) -> Result<TrajectoryTable> {
    if !(t_end > 0.0) || num_output_points < 2 {
        return Err(Error::contract("need t_end > 0 and at least two output points"));
    }
    if !(internal_step > 0.0) {
        return Err(Error::contract("internal step must be positive"));
    }
    let spacing = t_end / (num_output_points - 1) as f64;
    let ratio = spacing / internal_step;
    let substeps = ratio.round();
    if substeps < 1.0 || (ratio - substeps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::contract(format!(
            "internal step {internal_step} does not divide the output spacing {spacing}"
        )));
    }
    let substeps = substeps as usize;
    let h = spacing / substeps as f64;
    let times = GridSpec::new(0.0, t_end, num_output_points).times();

    let mut rk = Rk4::new(model);
    let mut p = model.initial_distribution().to_vec();
    let mut rows = Vec::with_capacity(num_output_points);
    let mut max_defect = 0.0f64;
    rows.push(p.clone());
    for w in times.windows(2) {
        let t0 = w[0];
        for s in 0..substeps {
            let t = t0 + s as f64 * h;
            rk.step(t, h, &mut p);
            let defect = (p.iter().sum::<f64>() - 1.0).abs();
            if !(defect <= STEP_DEFECT_LIMIT) {
                return Err(Error::Instability { t: t + h, defect });
            }
        }
        let (row, defect) = emit_row(&p, w[1])?;
        max_defect = max_defect.max(defect);
        rows.push(row);
    }
    let mut table = TrajectoryTable::new(
        model.name(),
        Provenance::OracleRk4,
        state_channels(model.num_states()),
        times,
        rows,
    )?;
    table.metadata.internal_step = Some(h);
    table.metadata.max_sum_defect = Some(max_defect);
    Ok(table)
}

/// Clamps round-off negatives and renormalises an output row; anything
/// larger than [`PROBABILITY_TOL`] is an instability.
fn emit_row(p: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
    let mut row = p.to_vec();
    for v in &mut row {
        if *v < 0.0 {
            if *v < -PROBABILITY_TOL {
                return Err(Error::Instability { t, defect: -*v });
            }
            *v = 0.0;
        }
    }
    let sum: f64 = row.iter().sum();
    let defect = (sum - 1.0).abs();
    if defect > PROBABILITY_TOL {
        return Err(Error::Instability { t, defect });
    }
    row.iter_mut().for_each(|v| *v /= sum);
    Ok((row, defect))
}

/// Exact solution of the homogeneous three-state propulsion module:
/// `p₀ = e^{−(2γ+λ)t}`, `p₁ = 2(e^{−(γ+λ)t} − e^{−(2γ+λ)t})`, `p₂ = 1 − p₀ − p₁`.
pub fn solve_closed_form_example1(t: f64, gamma: f64, lambda: f64) -> StateProbabilityVector {
    let p0 = (-(2.0 * gamma + lambda) * t).exp();
    let p1 = 2.0 * ((-(gamma + lambda) * t).exp() - p0);
    StateProbabilityVector {
        t,
        p: vec![p0, p1, 1.0 - p0 - p1],
    }
}

/// Closed-form trajectory on a grid.
pub fn closed_form_table(grid: &GridSpec, gamma: f64, lambda: f64) -> Result<TrajectoryTable> {
    let times = grid.times();
    let rows = times
        .iter()
        .map(|&t| solve_closed_form_example1(t, gamma, lambda).p)
        .collect();
    TrajectoryTable::new("example1", Provenance::ClosedForm, state_channels(3), times, rows)
}

/// `max ‖p_h − p_{h/2}‖∞` over the output grid.
pub fn richardson_check(
    model: &MssModel,
    t_end: f64,
    num_output_points: usize,
    internal_step: f64,
) -> Result<f64> {
    let coarse = solve_rk4(model, t_end, num_output_points, internal_step)?;
    let fine = solve_rk4(model, t_end, num_output_points, internal_step / 2.0)?;
    Ok(max_abs_difference(&coarse, &fine))
}

pub fn max_abs_difference(a: &TrajectoryTable, b: &TrajectoryTable) -> f64 {
    a.rows
        .iter()
        .zip(&b.rows)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}
