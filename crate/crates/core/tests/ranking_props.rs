mod support;

use gdr_core::consistency::RepairState;
use gdr_core::generator::UpdateId;
use gdr_core::ranking::{
    compute_rule_weights, estimate_group_gain, expected_loss_gain, gain_stats, group_budget, group_updates, GroupKey,
    MemberGain, RuleGain, RuleScope, RuleWeights,
};
use proptest::prelude::*;
use support::oracle;

fn members_strategy() -> impl Strategy<Value = (usize, Vec<MemberGain>)> {
    (1usize..5).prop_flat_map(|units| {
        let stat = (0..units, 0u32..50, 0u32..50, 0usize..30, 0usize..30).prop_map(|(unit, vb, va, sb, sa)| RuleGain {
            unit,
            vio_before: vb as f64,
            vio_after: va as f64,
            sat_before: sb,
            sat_after: sa,
        });
        let member = (0.0f64..=1.0, prop::collection::vec(stat, 0..4)).prop_map(|(p, mut stats)| {
            stats.sort_by_key(|s| s.unit);
            stats.dedup_by_key(|s| s.unit);
            MemberGain {
                id: UpdateId {
                    row: 0,
                    attr: gdr_core::AttrId(0),
                    seq: 0,
                },
                p,
                stats,
            }
        });
        (Just(units), prop::collection::vec(member, 1..8))
    })
}

fn weights(units: usize, ws: &[f64]) -> RuleWeights {
    let (data, rules) = gdr_core::fixtures::figure1();
    let state = RepairState::new(data, rules);
    let mut w = compute_rule_weights(&state, RuleScope::Normalized).unwrap();
    w.units.truncate(units.min(w.units.len()));
    for (u, x) in w.units.iter_mut().zip(ws) {
        u.weight = *x;
    }
    w
}

proptest! {
    #[test]
    fn closed_form_equals_loss_difference((units, members) in members_strategy(), ws in prop::collection::vec(0.0f64..1.0, 4)) {
        let w = weights(units, &ws);
        prop_assume!(members.iter().all(|m| m.stats.iter().all(|s| s.unit < w.units.len())));
        let a = estimate_group_gain(&members, &w);
        let b = expected_loss_gain(&members, &w);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn gain_scales_with_weights((units, members) in members_strategy(), k in 0.01f64..100.0) {
        let w = weights(units, &[0.3, 0.1, 0.5, 0.2]);
        prop_assume!(members.iter().all(|m| m.stats.iter().all(|s| s.unit < w.units.len())));
        let g = estimate_group_gain(&members, &w);
        let gk = estimate_group_gain(&members, &w.scaled(k));
        prop_assert!((gk - k * g).abs() <= 1e-9 * (1.0 + (k * g).abs()));
    }

    #[test]
    fn budget_is_within_group(gain in 0.0f64..10.0, g_max in 0.0f64..10.0, e in 0usize..500, size in 1usize..100) {
        let d = group_budget(gain.min(g_max), g_max, e, size);
        prop_assert!(d <= size);
        if g_max > 0.0 && gain >= g_max {
            prop_assert_eq!(d, 0);
        }
    }

    #[test]
    fn group_ids_round_trip(attr in 0usize..50, value in ".*") {
        let key = GroupKey { attr: gdr_core::AttrId(attr), value };
        prop_assert_eq!(GroupKey::parse_id(&key.id()), Some(key));
    }
}

#[test]
fn real_instances_agree_on_both_gain_forms() {
    for seed in 0..25 {
        let (data, rules) = oracle::random_instance(seed, 60, 6);
        let mut state = RepairState::new(data, rules);
        state.generate_all();
        for scope in [RuleScope::Normalized, RuleScope::Source] {
            let w = compute_rule_weights(&state, scope).unwrap();
            for g in group_updates(state.pending()) {
                let members: Vec<MemberGain> = g
                    .members
                    .iter()
                    .map(|&id| {
                        let u = state.get(id).unwrap();
                        MemberGain {
                            id,
                            p: u.score,
                            stats: gain_stats(&state, u, &w),
                        }
                    })
                    .collect();
                let a = estimate_group_gain(&members, &w);
                let b = expected_loss_gain(&members, &w);
                assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn weights_are_context_fractions() {
    for seed in 0..25 {
        let (data, rules) = oracle::random_instance(seed, 60, 6);
        let state = RepairState::new(data.clone(), rules.clone());
        let w = compute_rule_weights(&state, RuleScope::Normalized).unwrap();
        for (u, r) in w.units.iter().zip(rules.rules()) {
            let expected = oracle::context(&data, r) as f64 / data.len() as f64;
            assert!((u.weight - expected).abs() < 1e-12, "seed {seed} {}", r.id);
            assert!((0.0..=1.0).contains(&u.weight));
        }
    }
}
