//! Multi-state system definition: generator matrices, the Kolmogorov forward
//! right-hand side and reliability / performance aggregation.
//!
//! Probability vectors are row vectors throughout and evolve as `p' = p Q(t)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ s₀ = 1` for an initial distribution.
pub const INITIAL_SUM_TOL: f64 = 1e-12;
/// Tolerance on generator row sums.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Tolerance on entries and normalisation of a state probability vector.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// Dense square transition-rate (generator) matrix, row-major, units 1/time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl RateMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Builds a matrix from explicit rows, diagonal included.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::contract("rate matrix must be square and non-empty"));
        }
        Ok(Self {
            dim,
            data: rows.concat(),
        })
    }

    /// Builds a generator from its off-diagonal rates; each diagonal entry is
    /// set to minus the sum of the other entries of its row.
    pub fn from_off_diagonal(dim: usize, mut rate: impl FnMut(usize, usize) -> f64) -> Self {
        let mut q = Self::zeros(dim);
        for i in 0..dim {
            let mut out = 0.0;
            for j in 0..dim {
                if i != j {
                    let r = rate(i, j);
                    q.data[i * dim + j] = r;
                    out += r;
                }
            }
            q.data[i * dim + i] = -out;
        }
        q
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Row vector times matrix, `p Q`.
    pub fn left_mul(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.left_mul_into(p, &mut out);
        out
    }

    pub fn left_mul_into(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (o, &q) in out.iter_mut().zip(self.row(i)) {
                *o += pi * q;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &RateMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub type RateFn = Arc<dyn Fn(f64) -> RateMatrix + Send + Sync>;

/// A complete multi-state system: state space, generator `Q(t)`, initial
/// distribution and optional per-state performance rates.
#[derive(Clone)]
pub struct MssModel {
    name: String,
    num_states: usize,
    rate_fn: RateFn,
    initial: Vec<f64>,
    performance: Option<Vec<f64>>,
    time_unit: String,
    homogeneous: bool,
}

impl fmt::Debug for MssModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MssModel")
            .field("name", &self.name)
            .field("num_states", &self.num_states)
            .field("initial", &self.initial)
            .field("performance", &self.performance)
            .field("time_unit", &self.time_unit)
            .field("homogeneous", &self.homogeneous)
            .finish_non_exhaustive()
    }
}

impl MssModel {
    /// Time-dependent model. Only the initial distribution and the generator
    /// dimension are checked here; generator invariants are reported by
    /// [`validate_model`].
    pub fn new(
        name: impl Into<String>,
        initial: Vec<f64>,
        rate_fn: impl Fn(f64) -> RateMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        let model = Self {
            name: name.into(),
            num_states: initial.len(),
            rate_fn: Arc::new(rate_fn),
            initial,
            performance: None,
            time_unit: String::new(),
            homogeneous: false,
        };
        model.check_construction()?;
        Ok(model)
    }

    /// Time-homogeneous model; `Q(t)` is the constant `q`.
    pub fn homogeneous(name: impl Into<String>, initial: Vec<f64>, q: RateMatrix) -> Result<Self> {
        let mut model = Self::new(name, initial, move |_| q.clone())?;
        model.homogeneous = true;
        Ok(model)
    }

    fn check_construction(&self) -> Result<()> {
        if self.num_states < 2 {
            return Err(Error::contract("a multi-state system needs at least two states"));
        }
        if self.initial.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::contract("initial distribution has a negative or NaN entry"));
        }
        let sum: f64 = self.initial.iter().sum();
        if (sum - 1.0).abs() > INITIAL_SUM_TOL {
            return Err(Error::contract(format!(
                "initial distribution sums to {sum}, expected 1"
            )));
        }
        let q0 = (self.rate_fn)(0.0);
        if q0.dim() != self.num_states {
            return Err(Error::contract(format!(
                "generator is {0}x{0} but the model has {1} states",
                q0.dim(),
                self.num_states
            )));
        }
        Ok(())
    }

    pub fn with_performance(mut self, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != self.num_states {
            return Err(Error::contract(format!(
                "{} performance rates for {} states",
                rates.len(),
                self.num_states
            )));
        }
        self.performance = Some(rates);
        Ok(self)
    }

    pub fn with_time_unit(mut self, unit: impl Into<String>) -> Self {
        self.time_unit = unit.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn rate_matrix(&self, t: f64) -> RateMatrix {
        (self.rate_fn)(t)
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn performance_rates(&self) -> Option<&[f64]> {
        self.performance.as_deref()
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }
}

/// State probabilities `p(t)` at a single instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateProbabilityVector {
    pub t: f64,
    pub p: Vec<f64>,
}

impl StateProbabilityVector {
    pub fn new(t: f64, p: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = p
            .iter()
            .enumerate()
            .find(|(_, &v)| !(-PROBABILITY_TOL..=1.0 + PROBABILITY_TOL).contains(&v))
        {
            return Err(Error::contract(format!("p[{i}] = {v} is not a probability")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::contract(format!("probabilities sum to {sum}")));
        }
        Ok(Self { t, p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// `dp/dt = p Q(t)`.
pub fn kolmogorov_rhs(model: &MssModel, t: f64, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != model.num_states() {
        return Err(Error::contract(format!(
            "probability vector of length {} for a {}-state model",
            p.len(),
            model.num_states()
        )));
    }
    Ok(model.rate_matrix(t).left_mul(p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    RowSum { row: usize, residual: f64 },
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    PositiveDiagonal { row: usize, value: f64 },
    NonFinite { row: usize, col: usize },
    Dimension { found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocatedViolation {
    pub t: f64,
    pub violation: Violation,
}

impl fmt::Display for LocatedViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t = {}: ", self.t)?;
        match &self.violation {
            Violation::RowSum { row, residual } => write!(f, "row {row} sums to {residual:e}"),
            Violation::NegativeOffDiagonal { row, col, value } => {
                write!(f, "off-diagonal Q[{row}][{col}] = {value:e} < 0")
            }
            Violation::PositiveDiagonal { row, value } => {
                write!(f, "diagonal Q[{row}][{row}] = {value:e} > 0")
            }
            Violation::NonFinite { row, col } => write!(f, "Q[{row}][{col}] is not finite"),
            Violation::Dimension { found } => write!(f, "generator has dimension {found}"),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub checked_times: Vec<f64>,
    pub violations: Vec<LocatedViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks generator invariants at each sample time. Problems are collected,
/// never raised.
pub fn validate_model(model: &MssModel, sample_times: &[f64]) -> ValidationReport {
    let mut report = ValidationReport {
        checked_times: sample_times.to_vec(),
        violations: Vec::new(),
    };
    let n = model.num_states();
    for &t in sample_times {
        let q = model.rate_matrix(t);
        let mut push = |violation| report.violations.push(LocatedViolation { t, violation });
        if q.dim() != n {
            push(Violation::Dimension { found: q.dim() });
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let v = q.get(i, j);
                if !v.is_finite() {
                    push(Violation::NonFinite { row: i, col: j });
                } else if i != j && v < 0.0 {
                    push(Violation::NegativeOffDiagonal { row: i, col: j, value: v });
                } else if i == j && v > 0.0 {
                    push(Violation::PositiveDiagonal { row: i, value: v });
                }
            }
            let residual: f64 = q.row(i).iter().sum();
            if residual.is_finite() && residual.abs() > ROW_SUM_TOL {
                push(Violation::RowSum { row: i, residual });
            }
        }
    }
    report
}

/// Which states count as "working" when aggregating reliability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReliabilityQuery {
    /// Explicit acceptance indicator per state.
    Indicator(Vec<bool>),
    /// States whose performance rate is at least this demand.
    Threshold(f64),
}

impl ReliabilityQuery {
    pub fn indicator(&self, num_states: usize, performance: Option<&[f64]>) -> Result<Vec<bool>> {
        match self {
            ReliabilityQuery::Indicator(delta) => {
                if delta.len() != num_states {
                    return Err(Error::contract(format!(
                        "indicator of length {} for {num_states} states",
                        delta.len()
                    )));
                }
                Ok(delta.clone())
            }
            ReliabilityQuery::Threshold(demand) => {
                let g = performance.ok_or_else(|| {
                    Error::config("threshold query on a model without performance rates")
                })?;
                if g.len() != num_states {
                    return Err(Error::contract("performance rates do not match state count"));
                }
                Ok(g.iter().map(|&gi| gi >= *demand).collect())
            }
        }
    }
}

/// `R = Σ δᵢ pᵢ`.
pub fn aggregate_reliability(
    p: &StateProbabilityVector,
    query: &ReliabilityQuery,
    performance: Option<&[f64]>,
) -> Result<f64> {
    let delta = query.indicator(p.len(), performance)?;
    let r: f64 = p
        .p
        .iter()
        .zip(&delta)
        .filter(|(_, &d)| d)
        .map(|(pi, _)| pi)
        .sum();
    Ok(r.clamp(0.0, 1.0))
}

/// Probability mass per distinct performance rate, highest rate first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerformanceDistribution {
    pub levels: Vec<(f64, f64)>,
}

impl PerformanceDistribution {
    pub fn probability_of(&self, rate: f64) -> Option<f64> {
        self.levels.iter().find(|(g, _)| *g == rate).map(|(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.levels.iter().map(|(_, p)| p).sum()
    }
}

/// Distinct performance rates of a model, descending, each with the states
/// that deliver it.
pub fn performance_groups(performance: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut groups: BTreeMap<u64, (f64, Vec<usize>)> = BTreeMap::new();
    for (i, &g) in performance.iter().enumerate() {
        // Key on the bit pattern of the normalised value so -0.0 == 0.0.
        let key = (if g == 0.0 { 0.0 } else { g }).to_bits();
        groups.entry(key).or_insert((g, Vec::new())).1.push(i);
    }
    let mut out: Vec<_> = groups.into_values().collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

pub fn aggregate_performance_distribution(
    p: &StateProbabilityVector,
    model: &MssModel,
) -> Result<PerformanceDistribution> {
    let g = model
        .performance_rates()
        .ok_or_else(|| Error::config(format!("model '{}' has no performance rates", model.name())))?;
    if p.len() != g.len() {
        return Err(Error::contract("probability vector does not match model"));
    }
    let levels = performance_groups(g)
        .into_iter()
        .map(|(rate, states)| (rate, states.iter().map(|&i| p.p[i]).sum()))
        .collect();
    Ok(PerformanceDistribution { levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn rhs_example1_initial_state() {
        let m = catalog::build_example1();
        let d = kolmogorov_rhs(&m, 0.0, &[1.0, 0.0, 0.0]).unwrap();
        assert!(approx_eq(&d, &[-1.286e-4, 5.6e-5, 7.26e-5], 1e-18));
        assert!(d.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn rhs_example3_initial_state() {
        let m = catalog::build_example3();
        let d = kolmogorov_rhs(&m, 0.0, m.initial_distribution()).unwrap();
        let mut expected = vec![0.0; 12];
        expected[..4].copy_from_slice(&[-27.0, 7.0, 10.0, 10.0]);
        assert!(approx_eq(&d, &expected, 1e-12), "{d:?}");
    }

    #[test]
    fn rhs_vanishes_at_stationary_distribution() {
        // Two-state repairable unit: stationary = (mu, lambda) / (lambda + mu).
        let (lambda, mu) = (3.0, 7.0);
        let q = RateMatrix::from_rows(&[vec![-lambda, lambda], vec![mu, -mu]]).unwrap();
        let m = MssModel::homogeneous("repairable", vec![1.0, 0.0], q).unwrap();
        let pi = [mu / (lambda + mu), lambda / (lambda + mu)];
        let d = kolmogorov_rhs(&m, 1.0, &pi).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn rhs_rejects_dimension_mismatch() {
        let m = catalog::build_example1();
        assert!(matches!(
            kolmogorov_rhs(&m, 0.0, &[1.0, 0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn validation_flags_row_sum_defect() {
        let q = RateMatrix::from_rows(&[vec![-1.0, 1.0 + 1e-3], vec![0.0, 0.0]]).unwrap();
        let m = MssModel::homogeneous("bad", vec![1.0, 0.0], q).unwrap();
        let report = validate_model(&m, &[0.0]);
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0].violation {
            Violation::RowSum { row, residual } => {
                assert_eq!(*row, 0);
                assert!((residual - 1e-3).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_flags_sign_errors() {
        let q = RateMatrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        let m = MssModel::homogeneous("signs", vec![1.0, 0.0], q).unwrap();
        let report = validate_model(&m, &[0.0, 1.0]);
        assert_eq!(report.violations.len(), 4);
    }

    #[test]
    fn catalog_models_validate() {
        let r1 = validate_model(&catalog::build_example1(), &[0.0, 30000.0, 60000.0]);
        assert!(r1.is_valid(), "{:?}", r1.violations);
        let r2 = validate_model(&catalog::build_example2(2.0, 2.0), &[0.0, 150.0, 300.0]);
        assert!(r2.is_valid(), "{:?}", r2.violations);
    }

    #[test]
    fn construction_rejects_bad_initial_distribution() {
        let q = RateMatrix::zeros(2);
        assert!(MssModel::homogeneous("x", vec![0.6, 0.6], q.clone()).is_err());
        assert!(MssModel::homogeneous("x", vec![1.5, -0.5], q.clone()).is_err());
        assert!(MssModel::homogeneous("x", vec![1.0], RateMatrix::zeros(1)).is_err());
        assert!(MssModel::homogeneous("x", vec![1.0, 0.0, 0.0], q).is_err());
    }

    #[test]
    fn reliability_indicator() {
        let p = StateProbabilityVector::new(0.0, vec![1.0, 0.0, 0.0]).unwrap();
        let q = ReliabilityQuery::Indicator(vec![true, true, false]);
        assert_eq!(aggregate_reliability(&p, &q, None).unwrap(), 1.0);

        let p = StateProbabilityVector::new(1e4, vec![0.27637, 0.17862, 0.54501]).unwrap();
        let r = aggregate_reliability(&p, &q, None).unwrap();
        assert!((r - 0.45499).abs() < 1e-12);
    }

    #[test]
    fn reliability_threshold_needs_performance() {
        let p = StateProbabilityVector::new(0.0, vec![0.5, 0.5, 0.0]).unwrap();
        let q = ReliabilityQuery::Threshold(1.0);
        assert!(matches!(aggregate_reliability(&p, &q, None), Err(Error::Config(_))));
        let r = aggregate_reliability(&p, &q, Some(&[2200.0, 1100.0, 0.0])).unwrap();
        assert_eq!(r, 1.0);
        let r = aggregate_reliability(&p, &ReliabilityQuery::Threshold(2000.0), Some(&[2200.0, 1100.0, 0.0]))
            .unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn example3_rate_1_8_is_states_4_and_6() {
        let m = catalog::build_example3();
        let p: Vec<f64> = (1..=12).map(|i| i as f64 / 78.0).collect();
        let p = StateProbabilityVector::new(0.1, p).unwrap();
        let q = ReliabilityQuery::Indicator(
            m.performance_rates().unwrap().iter().map(|&g| g == 1.8).collect(),
        );
        let r = aggregate_reliability(&p, &q, None).unwrap();
        assert!((r - (4.0 + 6.0) / 78.0).abs() < 1e-15);
    }

    #[test]
    fn performance_distribution_example3() {
        let m = catalog::build_example3();
        let p0 = StateProbabilityVector::new(0.0, m.initial_distribution().to_vec()).unwrap();
        let d = aggregate_performance_distribution(&p0, &m).unwrap();
        assert_eq!(
            d.levels,
            vec![(3.5, 1.0), (2.0, 0.0), (1.8, 0.0), (1.5, 0.0), (0.0, 0.0)]
        );

        let uniform = StateProbabilityVector::new(0.0, vec![1.0 / 12.0; 12]).unwrap();
        let d = aggregate_performance_distribution(&uniform, &m).unwrap();
        let expected = [1.0, 1.0, 2.0, 2.0, 6.0].map(|k| k / 12.0);
        for ((_, p), e) in d.levels.iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!((d.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn performance_distribution_requires_rates() {
        let q = RateMatrix::from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let m = MssModel::homogeneous("bare", vec![1.0, 0.0], q).unwrap();
        let p = StateProbabilityVector::new(0.0, vec![1.0, 0.0]).unwrap();
        assert!(aggregate_performance_distribution(&p, &m).is_err());
    }
}
