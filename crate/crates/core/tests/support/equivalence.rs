use gdr_core::consistency::RepairState;
use gdr_core::ranking::{compute_rule_weights, gain_stats, RuleScope};
use gdr_core::violation::{detect_all, total_violations, tuple_violation_count};

use super::oracle;

/// Compares detection, per-tuple counts, totals and the gain statistics of
/// up to `max_updates` evenly spaced candidates against the brute-force
/// versions. Panics on the first disagreement.
pub fn check_instance(seed: u64, max_rows: usize, max_rules: usize, max_updates: usize) {
    let (data, rules) = oracle::random_instance(seed, max_rows, max_rules);
    let (dirty, index) = detect_all(&data, rules.clone());
    assert_eq!(dirty.dirty_rows(), &oracle::dirty(&data, &rules), "seed {seed}");
    for (i, r) in rules.rules().iter().enumerate() {
        for row in 0..data.len() {
            assert_eq!(
                tuple_violation_count(&data, &index, row, i),
                oracle::count(&data, r, row),
                "seed {seed} rule {} row {row}",
                r.id
            );
        }
        assert_eq!(index.rule_violations(i), oracle::violations(&data, r));
        assert_eq!(index.rule_satisfying(i), oracle::satisfying(&data, r));
        assert_eq!(index.context_size(i), oracle::context(&data, r));
    }
    assert_eq!(total_violations(&data, &rules), oracle::total(&data, &rules));

    let mut state = RepairState::new(data.clone(), rules.clone());
    state.generate_all();
    let n = state.pending_len();
    let step = n.div_ceil(max_updates.max(1)).max(1);
    for scope in [RuleScope::Normalized, RuleScope::Source] {
        let w = compute_rule_weights(&state, scope).unwrap();
        for u in state.pending().step_by(step) {
            let after = oracle::with_cell(&data, u.row, u.attr, &u.value);
            let stats = gain_stats(&state, u, &w);
            for (ui, unit) in w.units.iter().enumerate() {
                let mentions = unit.pieces.iter().any(|&p| rules.rule(p).mentions(u.attr));
                let s = stats.iter().find(|s| s.unit == ui);
                assert_eq!(s.is_some(), mentions);
                let Some(s) = s else { continue };
                let (vb, sb) = oracle::joint(&data, &rules, &unit.pieces);
                let (va, sa) = oracle::joint(&after, &rules, &unit.pieces);
                assert_eq!(
                    (s.vio_before, s.sat_before),
                    (vb, sb),
                    "seed {seed} {scope:?} {}",
                    unit.label
                );
                assert_eq!(
                    (s.vio_after, s.sat_after),
                    (va, sa),
                    "seed {seed} {scope:?} {} {}",
                    unit.label,
                    u.id
                );
            }
        }
    }
}
