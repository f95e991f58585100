mod support;

use std::sync::atomic::{AtomicUsize, Ordering};

use gdr_core::consistency::RepairState;
use proptest::prelude::*;
use support::driver::{drive, scripted_choices};
use support::oracle;

static EVENTS: AtomicUsize = AtomicUsize::new(0);

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn random_feedback_keeps_invariants(seed in 0u64..10_000, choices in prop::collection::vec((any::<u8>(), any::<u16>()), 1..64)) {
        let n = drive(seed, &choices);
        EVENTS.fetch_add(n, Ordering::Relaxed);
    }
}

#[test]
fn at_least_a_thousand_events_are_checked() {
    let mut total = 0;
    let mut seed = 0;
    while total < 1000 {
        total += drive(seed, &scripted_choices(seed));
        seed += 1;
    }
    assert!(total >= 1000);
}

#[test]
fn external_changes_keep_invariants() {
    for seed in 0..20 {
        let (data, rules) = oracle::random_instance(seed, 30, 5);
        let mut state = RepairState::new(data, rules);
        state.generate_all();
        for step in 0..30usize {
            let row = (step * 7) % state.data().len();
            let attr = gdr_core::AttrId(step % state.data().schema().len());
            let domain: Vec<String> = state.data().domain(attr).into_keys().collect();
            let v = domain[step % domain.len()].clone();
            state.external_change(row, attr, &v).unwrap();
            let issues = state.check_invariants();
            assert!(issues.is_empty(), "seed {seed} step {step}: {issues:?}");
        }
    }
}
