//! Every metric agrees with a naive re-derivation on random traces.

mod support;

use explorer_analytics::report::analyze;
use explorer_core::extraction::OwaspTable;
use proptest::prelude::*;

#[test]
fn two_hundred_seeded_traces() {
    for seed in 0..200u64 {
        let events = support::random_trace(seed);
        let bad = support::mismatches(&events);
        assert!(bad.is_empty(), "seed {seed}: {bad:?}");
    }
}

#[test]
fn random_traces_are_not_degenerate() {
    // the generator must exercise both classes, flags and evidence
    let (mut solved, mut dead, mut flags, mut files) = (0, 0, 0, 0);
    for seed in 0..200u64 {
        let o = support::naive(&support::random_trace(seed));
        solved += o.solved_rounds.len();
        dead += o.dead_end_rounds.len();
        flags += o.found;
        files += o.evidence_files;
    }
    assert!(solved > 100 && dead > 100 && flags > 100 && files > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analysis_is_deterministic(seed in any::<u64>()) {
        let events = support::random_trace(seed);
        let a = analyze(&events, None, None, &OwaspTable::default()).unwrap();
        let b = analyze(&events, None, None, &OwaspTable::default()).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert!(support::mismatches(&events).is_empty());
    }
}
