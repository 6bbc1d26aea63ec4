//! Self-contained SVG line charts, one file per channel.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const DASHES: [&str; 3] = ["", "6 4", "2 3"];

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Renders channel `c` of every table into one SVG document.
pub fn render_channel(tables: &[TrajectoryTable], c: usize, title: &str) -> String {
    let t_min = tables.iter().filter_map(|t| t.times.first()).copied().fold(f64::INFINITY, f64::min);
    let t_max = tables.iter().filter_map(|t| t.times.last()).copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in tables {
        for r in &t.rows {
            y_lo = y_lo.min(r[c]);
            y_hi = y_hi.max(r[c]);
        }
    }
    let (y_lo, y_hi) = padded_range(y_lo, y_hi);
    let (t_lo, t_hi) = if t_max > t_min { (t_min, t_max) } else { padded_range(t_min, t_max) };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - t_lo) / (t_hi - t_lo) * pw;
    let sy = |v: f64| TOP + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let tv = t_lo + f * (t_hi - t_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let (x, y) = (sx(tv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 18.0,
            tick_label(tv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, LEFT + pw / 2.0, HEIGHT - 8.0);
    for (i, t) in tables.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[i % DASHES.len()];
        let mut pts = String::new();
        for (time, row) in t.times.iter().zip(&t.rows) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(*time), sy(row[c]));
        }
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{}"/>"#,
            pts.trim_end()
        );
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let lx = LEFT + pw - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash_attr}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&t.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>_<channel>.svg` into `dir` for every channel, overlaying
/// all tables. The tables must describe the same model and channels.
pub fn emit_plots(tables: &[TrajectoryTable], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let first = tables.first().ok_or_else(|| Error::contract("nothing to plot"))?;
    for t in &tables[1..] {
        if t.model != first.model {
            return Err(Error::contract(format!(
                "cannot overlay models '{}' and '{}'",
                first.model, t.model
            )));
        }
        if t.channels != first.channels {
            return Err(Error::contract("tables have different channels"));
        }
    }
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(first.channels.len());
    for (c, name) in first.channels.iter().enumerate() {
        let path = dir.join(format!("{stem}_{name}.svg"));
        fs::write(&path, render_channel(tables, c, &format!("{} {name}", first.model)))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{state_channels, Provenance};

    fn table(model: &str, k: usize) -> TrajectoryTable {
        let rows = (0..5).map(|i| {
            let mut r = vec![0.0; k];
            r[0] = 1.0 - 0.1 * i as f64;
            r[k - 1] = 0.1 * i as f64;
            r
        });
        TrajectoryTable::new(model, Provenance::OracleRk4, state_channels(k), (0..5).map(f64::from).collect(), rows.collect())
            .unwrap()
    }

    #[test]
    fn one_file_per_channel() {
        let dir = tempfile::tempdir().unwrap();
        let a = table("example1", 3);
        let b = a.clone().with_label("pinn");
        let paths = emit_plots(&[a, b], dir.path(), "ex1").unwrap();
        assert_eq!(paths.len(), 3);
        let svg = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn single_series_single_polyline() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_plots(&[table("m", 2)], dir.path(), "x").unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(fs::read_to_string(&paths[1]).unwrap().matches("<polyline").count(), 1);
    }

    #[test]
    fn rendering_is_pure() {
        let t = [table("example1", 3)];
        assert_eq!(render_channel(&t, 1, "a"), render_channel(&t, 1, "a"));
    }

    #[test]
    fn mismatched_models_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = emit_plots(&[table("example1", 3), table("example2", 3)], dir.path(), "x");
        assert!(matches!(e, Err(Error::Contract(_))));
        assert!(matches!(emit_plots(&[], dir.path(), "x"), Err(Error::Contract(_))));
    }
}
