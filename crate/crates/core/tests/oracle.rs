mod common;

use common::*;
use mss_pinn::catalog::MODEL_NAMES;

#[test]
fn rk4_matches_closed_form() {
    let e = example1_rk4_vs_closed_form();
    assert!(e <= 1e-8, "{e}");
}

#[test]
fn step_halving_at_default_steps() {
    for name in MODEL_NAMES {
        let d = richardson(name);
        assert!(d <= 1e-9, "{name}: {d}");
    }
}

#[test]
fn oracle_rows_conserve_probability() {
    for name in MODEL_NAMES {
        let d = oracle_mass_defect(name);
        assert!(d <= 1e-9, "{name}: {d}");
    }
}
