//! Time series of state (or performance-channel) probabilities, shared by the
//! oracle and the trained network, with CSV + JSON sidecar serialisation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{performance_groups, MssModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OracleRk4,
    ClosedForm,
    Pinn,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub internal_step: Option<f64>,
    /// Largest `|Σp − 1|` seen on an emitted row before renormalisation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sum_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTable {
    pub model: String,
    pub provenance: Provenance,
    /// Free-form series name used in plot legends.
    pub label: String,
    pub channels: Vec<String>,
    pub metadata: SolverMetadata,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

/// Sidecar manifest written next to a trajectory CSV.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    model: String,
    provenance: Provenance,
    label: String,
    channels: Vec<String>,
    rows: usize,
    metadata: SolverMetadata,
}

pub fn state_channels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p_{i}")).collect()
}

pub fn performance_channel_label(rate: f64) -> String {
    format!("G_{rate:?}")
}

impl TrajectoryTable {
    pub fn new(
        model: impl Into<String>,
        provenance: Provenance,
        channels: Vec<String>,
        times: Vec<f64>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != rows.len() {
            return Err(Error::contract("one row per time is required"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::contract("trajectory times must be strictly increasing"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != channels.len()) {
            return Err(Error::contract(format!(
                "row of length {} for {} channels",
                r.len(),
                channels.len()
            )));
        }
        let label = match provenance {
            Provenance::OracleRk4 => "rk4",
            Provenance::ClosedForm => "closed form",
            Provenance::Pinn => "pinn",
        }
        .to_string();
        Ok(Self {
            model: model.into(),
            provenance,
            label,
            channels,
            metadata: SolverMetadata::default(),
            times,
            rows,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    /// Largest `|Σ row − 1|` over all rows.
    pub fn max_sum_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Re-expresses state probabilities as probabilities per distinct
    /// performance rate (highest first).
    pub fn to_performance_channels(&self, model: &MssModel) -> Result<Self> {
        let g = model
            .performance_rates()
            .ok_or_else(|| Error::config(format!("model '{}' has no performance rates", model.name())))?;
        if self.channels.len() != g.len() {
            return Err(Error::contract("table does not hold this model's state probabilities"));
        }
        let groups = performance_groups(g);
        let channels = groups.iter().map(|(r, _)| performance_channel_label(*r)).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| groups.iter().map(|(_, s)| s.iter().map(|&i| row[i]).sum()).collect())
            .collect();
        Ok(Self {
            channels,
            rows,
            ..self.clone()
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend(self.channels.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            let mut rec = vec![fmt17(*t)];
            rec.extend(row.iter().map(|v| fmt17(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.write_csv(&csv_path)?;
        let sidecar = Sidecar {
            model: self.model.clone(),
            provenance: self.provenance,
            label: self.label.clone(),
            channels: self.channels.clone(),
            rows: self.len(),
            metadata: self.metadata.clone(),
        };
        fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok((csv_path, json_path))
    }

    /// Reads a trajectory CSV; the sidecar JSON next to it is used when
    /// present, otherwise model/provenance default to `unknown`/`pinn`.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(csv_path)?;
        let header = r.headers()?.clone();
        if header.get(0) != Some("t") || header.len() < 2 {
            return Err(Error::Format {
                what: "trajectory csv",
                detail: "header must start with 't' followed by channel columns".into(),
            });
        }
        let channels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format {
                    what: "trajectory csv",
                    detail: e.to_string(),
                })?;
            times.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        let sidecar_path = csv_path.with_extension("json");
        let (model, provenance, label, metadata) = match fs::read_to_string(&sidecar_path) {
            Ok(text) => {
                let s: Sidecar = serde_json::from_str(&text)?;
                (s.model, s.provenance, s.label, s.metadata)
            }
            Err(_) => ("unknown".to_string(), Provenance::Pinn, "pinn".to_string(), SolverMetadata::default()),
        };
        let mut table = Self::new(model, provenance, channels, times, rows)?;
        table.label = label;
        table.metadata = metadata;
        Ok(table)
    }
}

/// 17 significant digits, round-trip exact for f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
