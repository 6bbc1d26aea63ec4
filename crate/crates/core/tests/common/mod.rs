//! Measurement routines shared by the property suites and the acceptance
//! runner. Each returns the measured quantity; callers own the thresholds.

#![allow(dead_code)]

use mss_pinn::catalog::{self, default_internal_step, flow_components, FLOW_STATE_ORDER};
use mss_pinn::loss::{InitialConditionLoss, ResidualLoss, ResidualPart};
use mss_pinn::model::{validate_model, MssModel, RateMatrix};
use mss_pinn::network::{
    forward, forward_batch, initialize_parameters, loss_gradient, loss_value, LossEvaluator, LossSeeds,
    NetworkArchitecture, NetworkParameters,
};
use mss_pinn::oracle::{closed_form_table, max_abs_difference, richardson_check, solve_rk4};
use mss_pinn::loss::GridSpec;
use mss_pinn::Result;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `‖a − b‖₂ / ‖b‖₂`, or the absolute norm when `b` vanishes.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if n > 1e-12 { d / n } else { d }
}

/// A random generator with rates in `[0, scale)`.
pub fn random_generator(rng: &mut impl Rng, k: usize, scale: f64) -> RateMatrix {
    RateMatrix::from_off_diagonal(k, |_, _| rng.random_range(0.0..scale))
}

pub struct Sample {
    pub params: NetworkParameters,
    pub taus: Vec<f64>,
    pub model: MssModel,
    pub t_scale: f64,
}

/// Small random network (0–2 hidden layers of width 1–8, 2–5 outputs) with
/// perturbed weights and biases, a random chain and a few random inputs.
pub fn random_sample(seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(0..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    let k = rng.random_range(2..=5);
    let arch = NetworkArchitecture::new(hidden, k).unwrap();
    let mut params = initialize_parameters(&arch, rng.random()).unwrap();
    for v in params.values_mut() {
        *v = *v * rng.random_range(0.5..2.0) + rng.random_range(-0.3..0.3);
    }
    let n = rng.random_range(1..=6);
    let taus: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let q = random_generator(&mut rng, k, 2.0);
    let mut s0 = vec![0.0; k];
    s0[0] = 1.0;
    let model = MssModel::homogeneous("random", s0, q).unwrap();
    Sample {
        params,
        taus,
        model,
        t_scale: rng.random_range(0.5..3.0),
    }
}

/// Worst relative error of `du/dτ` against central differences of `u`.
pub fn du_fd_error(s: &Sample) -> f64 {
    let mut worst = 0.0f64;
    for &tau in &s.taus {
        let h = 1e-5;
        let exact = forward(&s.params, tau).unwrap().du;
        let up = forward(&s.params, tau + h).unwrap().u;
        let dn = forward(&s.params, tau - h).unwrap().u;
        let fd: Vec<f64> = up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        worst = worst.max(rel_err(&exact, &fd));
    }
    worst
}

/// `Σ c_u·u + c_du·du` with fixed random coefficients.
pub struct LinearProbe {
    pub taus: Vec<f64>,
    pub c_u: Array2<f64>,
    pub c_du: Array2<f64>,
}

impl LossEvaluator for LinearProbe {
    fn inputs(&self) -> &[f64] {
        &self.taus
    }

    fn evaluate(&self, u: ArrayView2<'_, f64>, du: ArrayView2<'_, f64>) -> Result<LossSeeds> {
        let value = (&self.c_u * &u).sum() + (&self.c_du * &du).sum();
        Ok(LossSeeds {
            value,
            d_u: self.c_u.clone(),
            d_du: self.c_du.clone(),
        })
    }
}

/// Central-difference gradient, one coordinate at a time.
pub fn fd_gradient(params: &NetworkParameters, loss: &dyn LossEvaluator, h: f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.len())
        .map(|i| {
            let x = params.values()[i];
            p.values_mut()[i] = x + h;
            let up = loss_value(&p, loss).unwrap();
            p.values_mut()[i] = x - h;
            let dn = loss_value(&p, loss).unwrap();
            p.values_mut()[i] = x;
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Relative gradient errors for a linear probe, the initial-condition loss,
/// the full residual loss and one residual component.
pub fn gradient_fd_errors(s: &Sample, seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let (n, k) = (s.taus.len(), s.model.num_states());
    let probe = LinearProbe {
        taus: s.taus.clone(),
        c_u: Array2::from_shape_fn((n, k), |_| rng.random_range(-1.0..1.0)),
        c_du: Array2::from_shape_fn((n, k), |_| rng.random_range(-1.0..1.0)),
    };
    let ic = InitialConditionLoss::new(&s.model);
    let mut times: Vec<f64> = s.taus.iter().map(|t| t * s.t_scale).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let residual = ResidualLoss::at_times(&s.model, &times, s.t_scale);
    let part = rng.random_range(0..k);
    let residual_part = ResidualLoss::at_times(&s.model, &times, s.t_scale).part(ResidualPart::State(part));
    let losses: [(&'static str, &dyn LossEvaluator); 4] = [
        ("linear", &probe),
        ("initial", &ic),
        ("residual", &residual),
        ("residual_state", &residual_part),
    ];
    losses
        .iter()
        .map(|(name, loss)| {
            let (_, g) = loss_gradient(&s.params, *loss).unwrap();
            let fd = fd_gradient(&s.params, *loss, 1e-6);
            (*name, rel_err(&g, &fd))
        })
        .collect()
}

/// Directional-derivative check of the residual loss on the full-size
/// 1-50-50-`k` network at 64 collocation points.
pub fn full_size_directional_error(model: &MssModel, t_end: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = NetworkArchitecture::default_for(model.num_states()).unwrap();
    let params = initialize_parameters(&arch, seed).unwrap();
    let times = GridSpec::new(0.0, t_end, 64).times();
    let loss = ResidualLoss::at_times(model, &times, t_end);
    let (_, g) = loss_gradient(&params, &loss).unwrap();
    let v: Vec<f64> = (0..params.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gv: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
    let h = 1e-6;
    let shifted = |sign: f64| {
        let vals = params.values().iter().zip(&v).map(|(p, d)| p + sign * h * d).collect();
        let p = NetworkParameters::from_values(arch.clone(), vals).unwrap();
        loss_value(&p, &loss).unwrap()
    };
    let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
    (gv - fd).abs() / fd.abs().max(1e-300)
}

/// Softmax rows of a batch sum to one.
pub fn max_row_sum_defect(params: &NetworkParameters, taus: &[f64]) -> f64 {
    let f = forward_batch(params, taus).unwrap();
    f.u.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- oracle

/// Max |RK4 − closed form| for the propulsion module at 100 times in [0, 80000].
pub fn example1_rk4_vs_closed_form() -> f64 {
    let model = catalog::build_example1();
    let grid = GridSpec::new(0.0, 80000.0, 100);
    let rk = solve_rk4(&model, 80000.0, 100, default_internal_step("example1", 80000.0, 100)).unwrap();
    let exact = closed_form_table(&grid, catalog::PROPULSION_GAMMA, catalog::PROPULSION_LAMBDA).unwrap();
    max_abs_difference(&rk, &exact)
}

/// Evaluation grid `(t_end, points)` of each catalog model's preset.
pub fn preset_grid(name: &str) -> (f64, usize) {
    let p = catalog::preset(name).unwrap();
    (p.evaluation.t_end, p.evaluation.points)
}

/// Step-halving discrepancy at the default internal step.
pub fn richardson(name: &str) -> f64 {
    let model = catalog::build(name).unwrap();
    let (t_end, points) = preset_grid(name);
    richardson_check(&model, t_end, points, default_internal_step(name, t_end, points)).unwrap()
}

/// Largest `|Σp − 1|` of any oracle row before renormalisation.
pub fn oracle_mass_defect(name: &str) -> f64 {
    let model = catalog::build(name).unwrap();
    let (t_end, points) = preset_grid(name);
    let t = solve_rk4(&model, t_end, points, default_internal_step(name, t_end, points)).unwrap();
    t.metadata.max_sum_defect.unwrap().max(t.max_sum_defect())
}

// ---------------------------------------------------------------- models

/// Largest generator row-sum residual over 50 times of each catalog model's range.
pub fn catalog_row_sum_residual() -> f64 {
    let mut worst = 0.0f64;
    for name in catalog::MODEL_NAMES {
        let model = catalog::build(name).unwrap();
        let (t_end, _) = preset_grid(name);
        let times = GridSpec::new(0.0, t_end, 50).times();
        let report = validate_model(&model, &times);
        assert!(report.is_valid(), "{name}: {:?}", report.violations);
        for &t in &times {
            for s in model.rate_matrix(t).row_sums() {
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

/// Max entry difference between Weibull shape-1 rates and the homogeneous module.
pub fn example2_unit_shapes_vs_example1() -> f64 {
    let a = catalog::build_example1();
    let b = catalog::build_example2(1.0, 1.0);
    let mut worst = 0.0f64;
    for t in GridSpec::new(0.0, 80000.0, 101).times() {
        worst = worst.max(a.rate_matrix(t).max_abs_diff(&b.rate_matrix(t)));
    }
    let h = default_internal_step("example1", 300.0, 301);
    let ta = solve_rk4(&a, 300.0, 301, h).unwrap();
    let tb = solve_rk4(&b, 300.0, 301, h).unwrap();
    worst.max(max_abs_difference(&ta, &tb))
}

/// Max difference between the marginals of the joint flow-system solution
/// and independent solves of each pipe.
pub fn example3_marginal_error() -> f64 {
    let joint = catalog::build_example3();
    let (t_end, points) = preset_grid("example3");
    let h = default_internal_step("example3", t_end, points);
    let tj = solve_rk4(&joint, t_end, points, h).unwrap();
    let mut worst = 0.0f64;
    for (c, comp) in flow_components().iter().enumerate() {
        let m = comp.generator.dim();
        let mut s0 = vec![0.0; m];
        s0[0] = 1.0;
        let model = MssModel::homogeneous(comp.name, s0, comp.generator.clone()).unwrap();
        let tc = solve_rk4(&model, t_end, points, h).unwrap();
        for (row_j, row_c) in tj.rows.iter().zip(&tc.rows) {
            for (s, &pc) in row_c.iter().enumerate() {
                let marginal: f64 = FLOW_STATE_ORDER
                    .iter()
                    .zip(row_j)
                    .filter(|(st, _)| st[c] == s)
                    .map(|(_, p)| p)
                    .sum();
                worst = worst.max((marginal - pc).abs());
            }
        }
    }
    worst
}
