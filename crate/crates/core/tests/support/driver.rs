use gdr_core::consistency::{Feedback, RepairState, Source};
use gdr_core::generator::UpdateId;

use super::oracle;

/// Drives random feedback until nothing is pending; every event must leave
/// the state healthy. Returns the number of events applied.
pub fn drive(seed: u64, choices: &[(u8, u16)]) -> usize {
    let (data, rules) = oracle::random_instance(seed, 40, 6);
    let mut state = RepairState::new(data, rules);
    state.generate_all();
    assert!(state.check_invariants().is_empty());
    let limit = state.data().len() * state.data().schema().len() * 8;
    let mut events = 0;
    let mut i = 0;
    while state.pending_len() > 0 {
        assert!(events < limit, "seed {seed}: no termination after {events} events");
        let (kind, pick) = choices[i % choices.len()];
        i += 1;
        let ids: Vec<UpdateId> = state.pending().map(|u| u.id).collect();
        let id = ids[pick as usize % ids.len()];
        let u = state.get(id).unwrap().clone();
        let fb = match kind % 8 {
            0..=2 => Feedback::Confirm,
            3..=4 => Feedback::Reject,
            5 => Feedback::Retain,
            6 => {
                let domain: Vec<String> = state
                    .data()
                    .domain(u.attr)
                    .into_keys()
                    .filter(|v| *v != u.value)
                    .collect();
                Feedback::Replace(
                    domain
                        .get(pick as usize % domain.len().max(1))
                        .cloned()
                        .unwrap_or_else(|| "fresh".into()),
                )
            }
            _ => {
                let domain: Vec<String> = state.data().domain(u.attr).into_keys().collect();
                let v = &domain[pick as usize % domain.len()];
                if *v != state.data().cell(u.row, u.attr) && state.propose(u.row, u.attr, v).is_ok() {
                    events += 1;
                    let issues = state.check_invariants();
                    assert!(issues.is_empty(), "seed {seed} after propose: {issues:?}");
                }
                continue;
            }
        };
        let source = if kind % 2 == 0 { Source::User } else { Source::Model };
        let cs = state.apply_feedback(id, fb, source).unwrap();
        events += 1;
        let issues = state.check_invariants();
        assert!(issues.is_empty(), "seed {seed} event {events}: {issues:?}");
        for c in &cs.created {
            assert!(state.get(c.id).is_some() || cs.discarded.iter().any(|d| d.id == c.id));
        }
        assert!(
            state.apply_feedback(id, Feedback::Confirm, Source::User).is_err(),
            "decided update stays stale"
        );
    }
    events
}

/// A fixed feedback script that varies with the seed.
pub fn scripted_choices(seed: u64) -> Vec<(u8, u16)> {
    (0..37u16).map(|i| ((i * 7 + seed as u16) as u8, i * 13 + 5)).collect()
}
