mod common;

use common::*;
use mss_pinn::catalog;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn input_derivative_matches_central_differences(seed in any::<u64>()) {
        let s = random_sample(seed);
        let e = du_fd_error(&s);
        prop_assert!(e <= 1e-5, "relative error {e}");
    }

    #[test]
    fn parameter_gradients_match_central_differences(seed in any::<u64>()) {
        let s = random_sample(seed);
        for (loss, e) in gradient_fd_errors(&s, seed) {
            prop_assert!(e <= 1e-4, "{loss}: relative error {e}");
        }
    }

    #[test]
    fn softmax_rows_are_normalised(seed in any::<u64>()) {
        let s = random_sample(seed);
        prop_assert!(max_row_sum_defect(&s.params, &s.taus) <= 1e-12);
    }
}

#[test]
fn full_size_networks_directional_derivative() {
    for (name, t_end) in [("example1", 60000.0), ("example2", 300.0), ("example3", 0.2)] {
        let m = catalog::build(name).unwrap();
        let e = full_size_directional_error(&m, t_end, 11);
        assert!(e <= 1e-4, "{name}: {e}");
    }
}
