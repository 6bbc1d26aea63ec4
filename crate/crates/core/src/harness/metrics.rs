//! Network evaluation on a grid and error metrics against a reference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use crate::catalog::{MetricChannels, SubRange};
use crate::error::{Error, Result};
use crate::loss::GridSpec;
use crate::model::MssModel;
use crate::network::forward_batch;
use crate::trajectory::{state_channels, Provenance, TrajectoryTable};

/// Evaluates a trained network at every grid time (extrapolation beyond the
/// training interval is allowed).
pub fn evaluate(checkpoint: &Checkpoint, model: &MssModel, grid: &GridSpec) -> Result<TrajectoryTable> {
    let arch = checkpoint.params.architecture();
    if arch.output_dim != model.num_states() {
        return Err(Error::contract(format!(
            "checkpoint network {} has {} outputs but model '{}' has {} states",
            arch.descriptor(),
            arch.output_dim,
            model.name(),
            model.num_states()
        )));
    }
    grid.validate()?;
    let times = grid.times();
    let taus: Vec<f64> = times.iter().map(|t| t / checkpoint.header.t_scale).collect();
    let fwd = forward_batch(&checkpoint.params, &taus)?;
    let rows = fwd.u.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut table = TrajectoryTable::new(model.name(), Provenance::Pinn, state_channels(model.num_states()), times, rows)?;
    table.metadata.iteration = Some(checkpoint.header.iteration);
    Ok(table)
}

/// How per-channel errors are folded into one RMSE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseForm {
    /// `sqrt(mean over all times and channels)`.
    #[default]
    Pooled,
    /// Mean of per-channel RMSEs.
    ChannelMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub channels: Vec<String>,
    pub points: usize,
    pub rmse_overall: f64,
    pub rmse_channel_mean: f64,
    pub per_channel_rmse: Vec<f64>,
    pub per_channel_mae: Vec<f64>,
    /// Pooled RMSE over the times in each `(start, end]` window.
    pub sub_range_rmse: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn rmse(&self, form: RmseForm) -> f64 {
        match form {
            RmseForm::Pooled => self.rmse_overall,
            RmseForm::ChannelMean => self.rmse_channel_mean,
        }
    }
}

fn project(table: &TrajectoryTable, model: &MssModel, channels: MetricChannels) -> Result<TrajectoryTable> {
    match channels {
        MetricChannels::States => Ok(table.clone()),
        MetricChannels::PerformanceRates => table.to_performance_channels(model),
    }
}

/// Errors of `estimate` against `reference`, both holding state probabilities
/// of `model` on the same time grid.
pub fn compare(
    estimate: &TrajectoryTable,
    reference: &TrajectoryTable,
    model: &MssModel,
    channels: MetricChannels,
    sub_ranges: &[SubRange],
) -> Result<MetricReport> {
    if estimate.len() != reference.len() {
        return Err(Error::contract(format!(
            "tables have {} and {} rows",
            estimate.len(),
            reference.len()
        )));
    }
    if let Some(i) = (0..estimate.len()).find(|&i| {
        let (a, b) = (estimate.times[i], reference.times[i]);
        (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0)
    }) {
        return Err(Error::contract(format!(
            "time grids differ at row {i}: {} vs {}",
            estimate.times[i], reference.times[i]
        )));
    }
    if estimate.channels != reference.channels {
        return Err(Error::contract("tables have different channels"));
    }
    let a = project(estimate, model, channels)?;
    let b = project(reference, model, channels)?;
    let c = a.channels.len();
    let n = a.len();
    let mut sq = vec![0.0; c];
    let mut abs = vec![0.0; c];
    let mut window_sq = vec![0.0; sub_ranges.len()];
    let mut window_n = vec![0usize; sub_ranges.len()];
    for i in 0..n {
        let t = a.times[i];
        let mut row_sq = 0.0;
        for k in 0..c {
            let d = a.rows[i][k] - b.rows[i][k];
            sq[k] += d * d;
            abs[k] += d.abs();
            row_sq += d * d;
        }
        for (w, r) in sub_ranges.iter().enumerate() {
            if r.contains(t) {
                window_sq[w] += row_sq;
                window_n[w] += 1;
            }
        }
    }
    let nf = n as f64;
    let per_channel_rmse: Vec<f64> = sq.iter().map(|s| (s / nf).sqrt()).collect();
    let sub_range_rmse = sub_ranges
        .iter()
        .zip(window_sq.iter().zip(&window_n))
        .filter(|(_, (_, &m))| m > 0)
        .map(|(r, (s, &m))| (r.label.clone(), (s / (m * c) as f64).sqrt()))
        .collect();
    Ok(MetricReport {
        channels: a.channels.clone(),
        points: n,
        rmse_overall: (sq.iter().sum::<f64>() / (nf * c as f64)).sqrt(),
        rmse_channel_mean: per_channel_rmse.iter().sum::<f64>() / c as f64,
        per_channel_rmse,
        per_channel_mae: abs.iter().map(|s| s / nf).collect(),
        sub_range_rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_example1, build_example3};
    use crate::harness::checkpoint::CheckpointHeader;
    use crate::network::{initialize_parameters, NetworkArchitecture};

    fn table(times: Vec<f64>, rows: Vec<Vec<f64>>) -> TrajectoryTable {
        let k = rows[0].len();
        TrajectoryTable::new("example1", Provenance::OracleRk4, state_channels(k), times, rows).unwrap()
    }

    #[test]
    fn identical_tables_have_zero_error() {
        let m = build_example1();
        let t = table(vec![0.0, 1.0, 2.0], vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.25, 0.25], vec![0.2, 0.3, 0.5]]);
        let r = compare(&t, &t, &m, MetricChannels::States, &[SubRange::new(0.0, 2.0)]).unwrap();
        assert_eq!(r.rmse_overall, 0.0);
        assert_eq!(r.rmse_channel_mean, 0.0);
        assert!(r.per_channel_mae.iter().all(|v| *v == 0.0));
        assert_eq!(r.sub_range_rmse["(0,2]"], 0.0);
    }

    #[test]
    fn constant_offset_mae() {
        let m = build_example1();
        let eps = 0.01;
        let base: Vec<Vec<f64>> = (0..4).map(|_| vec![0.5, 0.3, 0.2]).collect();
        let shifted: Vec<Vec<f64>> = base.iter().map(|r| vec![r[0] + eps, r[1], r[2]]).collect();
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let r = compare(&table(times.clone(), shifted), &table(times, base), &m, MetricChannels::States, &[])
            .unwrap();
        assert!((r.per_channel_mae[0] - eps).abs() < 1e-15);
        assert_eq!(r.per_channel_mae[1], 0.0);
        assert!((r.rmse_overall - eps / 3f64.sqrt()).abs() < 1e-15);
        assert!((r.rmse_channel_mean - eps / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sub_ranges_split_points() {
        let m = build_example1();
        let times = vec![0.0, 1.0, 2.0];
        let a = table(times.clone(), vec![vec![1.0, 0.0, 0.0]; 3]);
        let mut rows = vec![vec![1.0, 0.0, 0.0]; 3];
        rows[2] = vec![0.7, 0.3, 0.0];
        let b = table(times, rows);
        let ranges = [SubRange::new(0.0, 1.0), SubRange::new(1.0, 2.0), SubRange::new(5.0, 6.0)];
        let r = compare(&a, &b, &m, MetricChannels::States, &ranges).unwrap();
        assert_eq!(r.sub_range_rmse["(0,1]"], 0.0);
        assert!((r.sub_range_rmse["(1,2]"] - (0.18f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(!r.sub_range_rmse.contains_key("(5,6]"));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let m = build_example1();
        let a = table(vec![0.0, 1.0], vec![vec![1.0, 0.0, 0.0]; 2]);
        let b = table(vec![0.0, 1.5], vec![vec![1.0, 0.0, 0.0]; 2]);
        assert!(matches!(compare(&a, &b, &m, MetricChannels::States, &[]), Err(Error::Contract(_))));
        let c = table(vec![0.0, 1.0, 2.0], vec![vec![1.0, 0.0, 0.0]; 3]);
        assert!(matches!(compare(&a, &c, &m, MetricChannels::States, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn performance_channels_used_for_flow_system() {
        let m = build_example3();
        let mut p = vec![0.0; 12];
        p[3] = 0.5;
        p[5] = 0.5;
        let mut q = vec![0.0; 12];
        q[3] = 1.0;
        let a = TrajectoryTable::new("example3", Provenance::Pinn, state_channels(12), vec![0.0], vec![p]).unwrap();
        let b = TrajectoryTable::new("example3", Provenance::OracleRk4, state_channels(12), vec![0.0], vec![q])
            .unwrap();
        // States 3 and 5 share the 1.8 level, so the channel view sees no error.
        let r = compare(&a, &b, &m, MetricChannels::PerformanceRates, &[]).unwrap();
        assert_eq!(r.channels.len(), 5);
        assert_eq!(r.rmse_overall, 0.0);
        let r = compare(&a, &b, &m, MetricChannels::States, &[]).unwrap();
        assert!(r.rmse_overall > 0.0);
    }

    #[test]
    fn evaluate_checks_architecture_and_normalises() {
        let arch = NetworkArchitecture::new(vec![6], 3).unwrap();
        let ck = Checkpoint {
            header: CheckpointHeader {
                architecture: arch.clone(),
                model: "example1".into(),
                iteration: 0,
                seed: 1,
                t_scale: 60000.0,
                config_digest: String::new(),
            },
            params: initialize_parameters(&arch, 1).unwrap(),
        };
        let grid = GridSpec::new(0.0, 80000.0, 17);
        let t = evaluate(&ck, &build_example1(), &grid).unwrap();
        assert_eq!(t.len(), 17);
        assert!(t.max_sum_defect() <= 1e-12);
        assert!(matches!(evaluate(&ck, &build_example3(), &grid), Err(Error::Contract(_))));
    }
}
