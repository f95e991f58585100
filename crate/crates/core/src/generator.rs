//! Candidate update generation.
//!
//! For a dirty cell `t[B]` three sources of values are explored:
//!
//! 1. `B` is the RHS of a violated constant rule: the rule's constant.
//! 2. `B` is the RHS of a violated variable rule: the RHS values of the
//!    tuples that violate the rule together with `t`.
//! 3. `B` is in the LHS of a violated rule: constants appearing for `B` in
//!    any rule, then `B` values of tuples agreeing with `t` on the rest of
//!    the rule's attributes, and only if neither yields an admissible value,
//!    the active domain of `B`. A value is admissible when it resolves at
//!    least one of the triggering violations and does not make `t` violate
//!    a rule it currently satisfies.
//!
//! The best value wins by score, then scenario number, then how often the
//! value occurred in its pool, then lexicographic order. Any score, zero
//! included, is acceptable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{AttrId, Dataset, PatternValue};
use crate::similarity::Similarity;
use crate::violation::{DirtyState, Overlay, ViolationIndex};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CellState {
    pub changeable: bool,
    pub prevented: BTreeSet<String>,
}

/// Per-cell changeable flags and prevented lists, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellStates {
    width: usize,
    cells: Vec<CellState>,
}

impl CellStates {
    pub fn new(rows: usize, width: usize) -> Self {
        CellStates {
            width,
            cells: vec![
                CellState {
                    changeable: true,
                    prevented: BTreeSet::new(),
                };
                rows * width
            ],
        }
    }

    pub fn get(&self, row: usize, attr: AttrId) -> &CellState {
        &self.cells[row * self.width + attr.0]
    }

    pub fn get_mut(&mut self, row: usize, attr: AttrId) -> &mut CellState {
        &mut self.cells[row * self.width + attr.0]
    }

    pub fn changeable(&self, row: usize, attr: AttrId) -> bool {
        self.get(row, attr).changeable
    }

    pub fn is_prevented(&self, row: usize, attr: AttrId, value: &str) -> bool {
        self.get(row, attr).prevented.contains(value)
    }
}

/// Value → rows postings per attribute, kept current with the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueIndex {
    postings: Vec<BTreeMap<String, BTreeSet<usize>>>,
}

impl ValueIndex {
    pub fn build(data: &Dataset) -> Self {
        let mut postings = vec![BTreeMap::new(); data.schema().len()];
        for row in 0..data.len() {
            for a in data.schema().attr_ids() {
                postings[a.0]
                    .entry(data.cell(row, a).to_string())
                    .or_insert_with(BTreeSet::new)
                    .insert(row);
            }
        }
        ValueIndex { postings }
    }

    pub fn update(&mut self, row: usize, attr: AttrId, old: &str, new: &str) {
        let p = &mut self.postings[attr.0];
        if let Some(rows) = p.get_mut(old) {
            rows.remove(&row);
            if rows.is_empty() {
                p.remove(old);
            }
        }
        p.entry(new.to_string()).or_default().insert(row);
    }

    pub fn rows_with(&self, attr: AttrId, value: &str) -> Option<&BTreeSet<usize>> {
        self.postings[attr.0].get(value)
    }

    /// Active domain of `attr` in lexicographic order.
    pub fn domain(&self, attr: AttrId) -> impl Iterator<Item = (&str, usize)> {
        self.postings[attr.0].iter().map(|(v, rows)| (v.as_str(), rows.len()))
    }
}

/// A dependency of a suggestion: one cell, or the group of tuples sharing
/// an LHS key under a variable rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dep {
    Cell(usize, AttrId),
    Group(usize, Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ConstantRhs = 1,
    VariableRhs = 2,
    Lhs = 3,
    /// Supplied from outside the generator.
    Proposed = 4,
}

/// Update identifier: row, attribute and the generation counter at creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateId {
    pub row: usize,
    pub attr: AttrId,
    pub seq: u64,
}

impl fmt::Display for UpdateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.row, self.attr.0, self.seq)
    }
}

impl FromStr for UpdateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('-').collect();
        let [row, attr, seq] = parts.as_slice() else {
            return Err(format!("malformed update id `{s}`"));
        };
        let bad = |_| format!("malformed update id `{s}`");
        Ok(UpdateId {
            row: row.parse().map_err(bad)?,
            attr: AttrId(attr.parse().map_err(bad)?),
            seq: seq.parse().map_err(bad)?,
        })
    }
}

impl Serialize for UpdateId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UpdateId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStatus {
    Pending,
    Confirmed,
    Rejected,
    Retained,
    Replaced,
    Discarded,
}

/// A suggested single-cell change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateUpdate {
    pub id: UpdateId,
    pub row: usize,
    pub attr: AttrId,
    pub value: String,
    pub current: String,
    pub score: f64,
    pub scenario: Scenario,
    #[serde(skip)]
    pub freq: usize,
    /// Cells the suggestion was derived from.
    #[serde(skip)]
    pub footprint: Vec<Dep>,
    /// Cell-version clock at generation.
    #[serde(skip)]
    pub stamp: u64,
    pub status: UpdateStatus,
}

/// A value picked for a cell, before it is registered as an update.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub value: String,
    pub score: f64,
    pub scenario: Scenario,
    pub freq: usize,
    pub footprint: Vec<Dep>,
}

/// Read-only view needed to generate candidates.
#[derive(Clone, Copy)]
pub struct GenContext<'a> {
    pub data: &'a Dataset,
    pub index: &'a ViolationIndex,
    pub dirty: &'a DirtyState,
    pub cells: &'a CellStates,
    pub values: &'a ValueIndex,
    pub sim: &'a dyn Similarity,
}

#[derive(Debug, Clone, PartialEq)]
struct Choice {
    value: String,
    score: f64,
    scenario: Scenario,
    freq: usize,
}

fn better(a: &Choice, b: &Choice) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.scenario != b.scenario {
        return a.scenario < b.scenario;
    }
    if a.freq != b.freq {
        return a.freq > b.freq;
    }
    a.value < b.value
}

fn pick(options: impl IntoIterator<Item = Choice>) -> Option<Choice> {
    let mut best: Option<Choice> = None;
    for o in options {
        if best.as_ref().is_none_or(|b| better(&o, b)) {
            best = Some(o);
        }
    }
    best
}

/// Best value for `row[attr]`, or `None` when the cell is frozen, clean, or
/// no admissible value exists.
pub fn update_attribute_tuple(ctx: &GenContext<'_>, row: usize, attr: AttrId) -> Option<Proposal> {
    if !ctx.cells.changeable(row, attr) {
        return None;
    }
    let violated = ctx.dirty.violated_rules(row);
    if violated.is_empty() {
        return None;
    }
    let rules = ctx.index.rules();
    let current = ctx.data.cell(row, attr);
    let mut options = Vec::new();
    for &ri in violated {
        let r = rules.rule(ri);
        if r.rhs != attr {
            continue;
        }
        match &r.rhs_pattern {
            PatternValue::Const(c) => {
                if c != current && !ctx.cells.is_prevented(row, attr, c) {
                    options.push(Choice {
                        value: c.clone(),
                        score: ctx.sim.similarity(current, c),
                        scenario: Scenario::ConstantRhs,
                        freq: 1,
                    });
                }
            }
            PatternValue::Wildcard => {
                if let Some((score, value, freq)) = get_value_for_rhs(ctx, ri, row) {
                    options.push(Choice {
                        value,
                        score,
                        scenario: Scenario::VariableRhs,
                        freq,
                    });
                }
            }
        }
    }
    if violated.iter().any(|&ri| rules.rule(ri).lhs.contains(&attr)) {
        if let Some((score, value, freq)) = get_value_for_lhs(ctx, row, attr) {
            options.push(Choice {
                value,
                score,
                scenario: Scenario::Lhs,
                freq,
            });
        }
    }
    let best = pick(options)?;
    Some(Proposal {
        footprint: footprint(ctx, row, attr),
        value: best.value,
        score: best.score,
        scenario: best.scenario,
        freq: best.freq,
    })
}

/// Partner values for a violated variable rule: `(score, value, frequency)`
/// of the best value not prevented for `row[rhs]`.
pub fn get_value_for_rhs(ctx: &GenContext<'_>, rule: usize, row: usize) -> Option<(f64, String, usize)> {
    let r = ctx.index.rules().rule(rule);
    let current = ctx.data.cell(row, r.rhs);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in ctx.index.partners(rule, ctx.data, row) {
        let v = ctx.data.cell(p, r.rhs);
        if v != current && !ctx.cells.is_prevented(row, r.rhs, v) {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    pick(counts.into_iter().map(|(v, n)| Choice {
        score: ctx.sim.similarity(current, v),
        value: v.to_string(),
        scenario: Scenario::VariableRhs,
        freq: n,
    }))
    .map(|o| (o.score, o.value, o.freq))
}

/// Whether `row[attr] := value` resolves one of `triggering` and does not
/// make `row` violate any rule mentioning `attr` that it satisfies now.
pub fn lhs_admissible(ctx: &GenContext<'_>, row: usize, attr: AttrId, value: &str, triggering: &[usize]) -> bool {
    let ov = Overlay::new(row, attr, value);
    let violated = ctx.dirty.violated_rules(row);
    let index = ctx.index;
    let resolves = triggering
        .iter()
        .any(|&ri| violated.contains(&ri) && index.row_count_after(ri, ctx.data, ov) == 0);
    resolves
        && index
            .rules()
            .mentioning(attr)
            .iter()
            .filter(|ri| !violated.contains(ri))
            .all(|&ri| index.row_count_after(ri, ctx.data, ov) == 0)
}

/// Scenario-3 search for `row[attr]` where `attr` is on the LHS of a
/// violated rule.
pub fn get_value_for_lhs(ctx: &GenContext<'_>, row: usize, attr: AttrId) -> Option<(f64, String, usize)> {
    let rules = ctx.index.rules();
    let current = ctx.data.cell(row, attr);
    let triggering: Vec<usize> = ctx
        .dirty
        .violated_rules(row)
        .iter()
        .copied()
        .filter(|&ri| rules.rule(ri).lhs.contains(&attr))
        .collect();
    let usable = |v: &str| v != current && !ctx.cells.is_prevented(row, attr, v);

    let mut pool: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rules.rules() {
        if let Some(pos) = r.lhs_position(attr) {
            if let PatternValue::Const(c) = &r.lhs_pattern[pos] {
                *pool.entry(c.as_str()).or_insert(0) += 1;
            }
        }
        if r.rhs == attr {
            if let PatternValue::Const(c) = &r.rhs_pattern {
                *pool.entry(c.as_str()).or_insert(0) += 1;
            }
        }
    }
    for &ri in &triggering {
        let r = rules.rule(ri);
        let others: Vec<AttrId> = r.attrs().filter(|&a| a != attr).collect();
        let seed = others
            .iter()
            .filter_map(|&a| ctx.values.rows_with(a, ctx.data.cell(row, a)).map(|rows| (a, rows)))
            .min_by_key(|(_, rows)| rows.len());
        let Some((_, rows)) = seed else { continue };
        for &o in rows {
            if o != row && others.iter().all(|&a| ctx.data.cell(o, a) == ctx.data.cell(row, a)) {
                *pool.entry(ctx.data.cell(o, attr)).or_insert(0) += 1;
            }
        }
    }
    let choose = |pool: Vec<(&str, usize)>| {
        let mut best: Option<(f64, &str, usize)> = None;
        for (v, n) in pool {
            if !usable(v) {
                continue;
            }
            let score = ctx.sim.similarity(current, v);
            let wins = best.is_none_or(|(bs, bv, bn)| score > bs || (score == bs && (n > bn || (n == bn && v < bv))));
            if wins && lhs_admissible(ctx, row, attr, v, &triggering) {
                best = Some((score, v, n));
            }
        }
        best.map(|(score, v, n)| Choice {
            score,
            value: v.to_string(),
            scenario: Scenario::Lhs,
            freq: n,
        })
    };
    let found = choose(pool.into_iter().collect()).or_else(|| choose(ctx.values.domain(attr).collect()));
    found.map(|o| (o.score, o.value, o.freq))
}

/// What a suggestion for `row[attr]` depends on: the tuple's cells over the
/// attributes of its violated rules plus `attr`, and the groups of its
/// violated variable rules.
pub fn footprint(ctx: &GenContext<'_>, row: usize, attr: AttrId) -> Vec<Dep> {
    let rules = ctx.index.rules();
    let mut deps = BTreeSet::new();
    deps.insert(Dep::Cell(row, attr));
    for &ri in ctx.dirty.violated_rules(row) {
        let r = rules.rule(ri);
        for a in r.attrs() {
            deps.insert(Dep::Cell(row, a));
        }
        if let Some(key) = ctx.index.group_key(ri, ctx.data, row) {
            deps.insert(Dep::Group(ri, key));
        }
    }
    deps.into_iter().collect()
}
