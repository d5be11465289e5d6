use acoustic_core::gradcheck::{self, TOLERANCE};

#[test]
fn every_op_layer_and_loss_matches_finite_differences() {
    for seed in [1, 2, 3] {
        let results = gradcheck::suite(seed).expect("suite runs");
        let failed: Vec<_> = results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{} ({:.2e})", r.name, r.rel_error))
            .collect();
        assert!(failed.is_empty(), "seed {seed}: {failed:?} above {TOLERANCE}");
    }
}
