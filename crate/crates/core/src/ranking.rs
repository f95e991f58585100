//! Grouping and expected-gain ranking of pending updates.
//!
//! A group is every pending update with the same `(attribute, value)`. Its
//! expected gain is
//!
//! ```text
//! E[g(c)] = Σ_i w_i Σ_{r_j ∈ c} p_j · (vio(D, φ_i) − vio(D^{r_j}, φ_i)) / max(1, |D^{r_j} ⊨ φ_i|)
//! ```
//!
//! with `w_i = |D(φ_i)| / |D|` and `p_j` the probability that the user
//! confirms `r_j`. Counts after `r_j` come from an overlay on the violation
//! index, never from mutating the data.
//!
//! Rules can be read one normalized piece at a time ([`RuleScope::Normalized`],
//! the default) or jointly per source line ([`RuleScope::Source`]), where the
//! violations of the pieces add up and a tuple satisfies the line only if it
//! satisfies every piece.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::RepairState;
use crate::error::{Error, Result};
use crate::generator::{CandidateUpdate, UpdateId};
use crate::model::AttrId;
use crate::violation::{joint_source_stats, Overlay};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleScope {
    #[default]
    Normalized,
    Source,
}

/// The unit a weight and a gain term are attached to: one normalized rule,
/// or all pieces of one source rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleUnit {
    pub label: String,
    pub pieces: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleWeights {
    pub scope: RuleScope,
    pub units: Vec<RuleUnit>,
}

impl RuleWeights {
    pub fn weight(&self, unit: usize) -> f64 {
        self.units[unit].weight
    }

    /// Multiplies every weight by `k`.
    pub fn scaled(&self, k: f64) -> RuleWeights {
        let mut w = self.clone();
        for u in &mut w.units {
            u.weight *= k;
        }
        w
    }
}

pub fn compute_rule_weights(state: &RepairState, scope: RuleScope) -> Result<RuleWeights> {
    let n = state.data().len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let rules = state.rules();
    let units = match scope {
        RuleScope::Normalized => rules
            .rules()
            .iter()
            .enumerate()
            .map(|(i, r)| RuleUnit {
                label: r.id.clone(),
                pieces: vec![i],
                weight: state.index().context_size(i) as f64 / n as f64,
            })
            .collect(),
        RuleScope::Source => rules
            .sources()
            .iter()
            .map(|(id, pieces)| RuleUnit {
                label: id.clone(),
                pieces: pieces.clone(),
                weight: state.index().context_size(pieces[0]) as f64 / n as f64,
            })
            .collect(),
    };
    Ok(RuleWeights { scope, units })
}

/// Counts for one rule unit before and after applying a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleGain {
    pub unit: usize,
    pub vio_before: f64,
    pub vio_after: f64,
    pub sat_before: usize,
    pub sat_after: usize,
}

/// Gain inputs for one candidate: its confirm probability and the counts
/// for every rule unit that mentions its attribute. Units not listed have
/// equal counts before and after.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberGain {
    pub id: UpdateId,
    pub p: f64,
    pub stats: Vec<RuleGain>,
}

pub fn gain_stats(state: &RepairState, u: &CandidateUpdate, weights: &RuleWeights) -> Vec<RuleGain> {
    let rules = state.rules();
    let data = state.data();
    let index = state.index();
    let ov = Overlay::new(u.row, u.attr, &u.value);
    let mut out = Vec::new();
    for (ui, unit) in weights.units.iter().enumerate() {
        if !unit.pieces.iter().any(|&p| rules.rule(p).mentions(u.attr)) {
            continue;
        }
        let g = match weights.scope {
            RuleScope::Normalized => {
                let p = index.probe(unit.pieces[0], data, ov);
                RuleGain {
                    unit: ui,
                    vio_before: p.vio_before,
                    vio_after: p.vio_after,
                    sat_before: p.sat_before,
                    sat_after: p.sat_after,
                }
            }
            RuleScope::Source => {
                let (vb, sb) = joint_source_stats(data, index, &unit.pieces, None);
                let (va, sa) = joint_source_stats(data, index, &unit.pieces, Some(ov));
                RuleGain {
                    unit: ui,
                    vio_before: vb,
                    vio_after: va,
                    sat_before: sb,
                    sat_after: sa,
                }
            }
        };
        out.push(g);
    }
    out
}

/// Closed-form expected gain of a group.
pub fn estimate_group_gain(members: &[MemberGain], weights: &RuleWeights) -> f64 {
    let mut per_unit: BTreeMap<usize, f64> = BTreeMap::new();
    for m in members {
        for s in &m.stats {
            let denom = s.sat_after.max(1) as f64;
            *per_unit.entry(s.unit).or_insert(0.0) += m.p * (s.vio_before - s.vio_after) / denom;
        }
    }
    per_unit.iter().map(|(&u, &x)| weights.weight(u) * x).sum()
}

/// The same gain computed as current expected loss minus the expected loss
/// after feedback, with a rejected candidate leaving the counts unchanged.
pub fn expected_loss_gain(members: &[MemberGain], weights: &RuleWeights) -> f64 {
    let mut loss_now = 0.0;
    let mut loss_after = 0.0;
    for m in members {
        for s in &m.stats {
            let w = weights.weight(s.unit);
            let d_conf = s.sat_after.max(1) as f64;
            let d_rej = s.sat_before.max(1) as f64;
            loss_now += w * (m.p * s.vio_before / d_conf + (1.0 - m.p) * s.vio_before / d_rej);
            loss_after += m.p * w * s.vio_after / d_conf + (1.0 - m.p) * w * s.vio_before / d_rej;
        }
    }
    loss_now - loss_after
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub attr: AttrId,
    pub value: String,
}

impl GroupKey {
    /// URL-safe identifier: attribute index and hex-encoded value.
    pub fn id(&self) -> String {
        let hex: String = self.value.bytes().map(|b| format!("{b:02x}")).collect();
        format!("{}-{}", self.attr.0, hex)
    }

    pub fn parse_id(id: &str) -> Option<GroupKey> {
        let (attr, hex) = id.split_once('-')?;
        let attr = AttrId(attr.parse().ok()?);
        if hex.len() % 2 != 0 {
            return None;
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(hex.get(i..i + 2)?, 16).ok())
            .collect::<Option<Vec<u8>>>()?;
        Some(GroupKey {
            attr,
            value: String::from_utf8(bytes).ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateGroup {
    pub key: GroupKey,
    pub members: Vec<UpdateId>,
    pub gain: f64,
}

impl UpdateGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Partitions updates by `(attribute, value)`; groups come out in key order
/// with members in (row, attribute) order and zero gain.
pub fn group_updates<'a>(pending: impl IntoIterator<Item = &'a CandidateUpdate>) -> Vec<UpdateGroup> {
    let mut groups: BTreeMap<GroupKey, Vec<UpdateId>> = BTreeMap::new();
    for u in pending {
        groups
            .entry(GroupKey {
                attr: u.attr,
                value: u.value.clone(),
            })
            .or_default()
            .push(u.id);
    }
    groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort();
            UpdateGroup {
                key,
                members,
                gain: 0.0,
            }
        })
        .collect()
}

/// Descending gain, then larger group, then key.
pub fn rank_groups(groups: &mut [UpdateGroup]) {
    groups.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then(b.members.len().cmp(&a.members.len()))
            .then_with(|| a.key.cmp(&b.key))
    });
}

/// Number of updates the user checks in a group before the model may take
/// over: `round(e · (1 − gain / g_max))` clamped to the group size, or the
/// whole group when no group has positive gain.
pub fn group_budget(gain: f64, g_max: f64, e: usize, size: usize) -> usize {
    if g_max <= 0.0 || !g_max.is_finite() {
        return size;
    }
    let d = (e as f64 * (1.0 - gain / g_max)).round();
    if d <= 0.0 {
        0
    } else {
        (d as usize).min(size)
    }
}

/// Groups all pending updates of `state`, computes each group's expected
/// gain with `p` supplying the confirm probabilities, and ranks them.
pub fn rank_pending<F>(state: &RepairState, weights: &RuleWeights, p: F) -> Vec<UpdateGroup>
where
    F: Fn(&CandidateUpdate) -> f64 + Sync,
{
    let mut groups = group_updates(state.pending());
    groups.par_iter_mut().for_each(|g| {
        let members: Vec<MemberGain> = g
            .members
            .iter()
            .filter_map(|&id| state.get(id))
            .map(|u| MemberGain {
                id: u.id,
                p: p(u),
                stats: gain_stats(state, u, weights),
            })
            .collect();
        g.gain = estimate_group_gain(&members, weights);
    });
    rank_groups(&mut groups);
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn budget_formula() {
        assert_eq!(group_budget(2.0, 2.0, 100, 40), 0);
        assert_eq!(group_budget(0.0, 2.0, 100, 40), 40);
        assert_eq!(group_budget(1.0, 2.0, 100, 80), 50);
        assert_eq!(group_budget(1.0, 0.0, 100, 7), 7);
    }

    #[test]
    fn group_ids_round_trip() {
        let k = GroupKey {
            attr: AttrId(3),
            value: "Michigan City/é-".into(),
        };
        assert_eq!(GroupKey::parse_id(&k.id()), Some(k));
        assert_eq!(GroupKey::parse_id("3-zz"), None);
        assert_eq!(GroupKey::parse_id("x"), None);
    }

    #[test]
    fn source_weights_on_figure1() {
        let (d, rules) = fixtures::figure1();
        let s = RepairState::new(d, rules);
        let w = compute_rule_weights(&s, RuleScope::Source).unwrap();
        let got: Vec<f64> = w.units.iter().map(|u| u.weight * 8.0).collect();
        assert_eq!(got, [4.0, 1.0, 2.0, 1.0, 3.0]);
    }

    #[test]
    fn ties_prefer_larger_groups() {
        let key = |v: &str| GroupKey {
            attr: AttrId(0),
            value: v.into(),
        };
        let id = |r| UpdateId {
            row: r,
            attr: AttrId(0),
            seq: r as u64,
        };
        let mut g = vec![
            UpdateGroup {
                key: key("a"),
                members: vec![id(1)],
                gain: 0.3,
            },
            UpdateGroup {
                key: key("b"),
                members: vec![id(2), id(3)],
                gain: 0.3,
            },
            UpdateGroup {
                key: key("c"),
                members: vec![id(4)],
                gain: 1.05,
            },
        ];
        rank_groups(&mut g);
        let order: Vec<&str> = g.iter().map(|g| g.key.value.as_str()).collect();
        assert_eq!(order, ["c", "b", "a"]);
    }
}
