use std::path::Path;
use std::process::{Command, Output};

use mss_pinn::harness::{TrainingConfig, WeibullShapes};

fn mss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mss-pinn"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_models_shows_states_and_units() {
    let d = tempfile::tempdir().unwrap();
    let o = mss(d.path(), &["list-models"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.lines().any(|l| l.starts_with("example1") && l.contains(" 3 ") && l.contains("hours")));
    assert!(s.lines().any(|l| l.starts_with("example3") && l.contains(" 12 ") && l.contains("years")));
}

#[test]
fn solve_writes_trajectory() {
    let d = tempfile::tempdir().unwrap();
    let o = mss(d.path(), &["solve", "example1", "--points", "11", "--out", "sol"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("sol/oracle.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,p_0,p_1,p_2");
    assert_eq!(csv.lines().count(), 12);
    assert!(d.path().join("sol/oracle.json").exists());
}

#[test]
fn train_evaluate_compare_plot() {
    let d = tempfile::tempdir().unwrap();
    let o = mss(d.path(), &["train", "1", "--smoke", "--iterations", "30", "--seed", "7", "--out", "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rmse (pooled)"));
    let manifest = std::fs::read_to_string(d.path().join("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 7"));

    let o = mss(d.path(), &["evaluate", "run/checkpoint_0000030.ckpt", "--out", "ev", "--points", "5001"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = mss(d.path(), &["solve", "1", "--out", "ref"]);
    assert!(o.status.success());
    let o = mss(
        d.path(),
        &["compare", "ev/evaluation.csv", "ref/oracle.csv", "--sub-range", "60000:80000", "--out", "cmp"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("range (60000,80000]"));
    assert!(d.path().join("cmp/metrics.json").exists());

    let o = mss(d.path(), &["plot", "ref/oracle.csv", "ev/evaluation.csv", "--out", "fig"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(d.path().join("fig")).unwrap().count(), 3);
}

#[test]
fn config_file_drives_training() {
    let d = tempfile::tempdir().unwrap();
    let mut cfg = TrainingConfig::preset("example3").unwrap();
    cfg.iterations = 5;
    cfg.collocation.points = 20;
    std::fs::write(d.path().join("run.toml"), cfg.to_toml()).unwrap();
    let o = mss(d.path(), &["train", "--config", "run.toml", "--out", "r"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("5 iterations"));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(mss(d.path(), &["train", "1", "--iterations", "0"]).status.code(), Some(2));
    assert_eq!(mss(d.path(), &["reproduce", "7"]).status.code(), Some(2));
    assert_eq!(mss(d.path(), &["solve", "nosuchmodel"]).status.code(), Some(2));
    std::fs::write(d.path().join("bad.toml"), "model = ").unwrap();
    assert_eq!(mss(d.path(), &["train", "--config", "bad.toml"]).status.code(), Some(2));
    assert_eq!(mss(d.path(), &["plot", "missing.csv"]).status.code(), Some(4));
    assert_eq!(mss(d.path(), &["evaluate", "missing.ckpt"]).status.code(), Some(4));

    // An infinite hazard at t = 0 makes the very first loss non-finite.
    let mut cfg = TrainingConfig::preset("example2").unwrap();
    cfg.weibull = Some(WeibullShapes { alpha: 0.5, beta: 2.0 });
    cfg.iterations = 3;
    std::fs::write(d.path().join("unstable.toml"), cfg.to_toml()).unwrap();
    let o = mss(d.path(), &["train", "--config", "unstable.toml", "--out", "u"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("integration unstable"));
    // Without an oracle comparison the training loop itself reports it.
    cfg.evaluation.t_start = 1.0;
    std::fs::write(d.path().join("div.toml"), cfg.to_toml()).unwrap();
    let o = mss(d.path(), &["train", "--config", "div.toml", "--out", "div"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged at iteration 0"));
}
