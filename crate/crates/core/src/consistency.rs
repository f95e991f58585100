//! Repair state and feedback application.
//!
//! [`RepairState`] owns the working dataset together with everything derived
//! from it: the violation index, the dirty list, per-cell flags, and the
//! pending updates (at most one per cell). Every write goes through
//! [`RepairState::apply_feedback`], [`RepairState::external_change`] or a
//! forced constant write, all of which run the same maintenance pass:
//!
//! * the violation index and dirty list follow the write exactly;
//! * cells touched by a changed violation, and cells whose pending update had
//!   the written cell or one of its changed groups in their footprint, are
//!   collected for a revisit;
//! * a constant rule that the tuple now violates with a fully frozen LHS
//!   forces its RHS constant (recorded as a system change);
//! * stale and frozen updates are dropped, revisited cells regenerated.
//!
//! [`RepairState::check_invariants`] rebuilds the derived structures from
//! scratch and reports any drift.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{
    footprint, update_attribute_tuple, CandidateUpdate, CellStates, Dep, GenContext, Proposal, Scenario, UpdateId,
    UpdateStatus, ValueIndex,
};
use crate::model::{AttrId, Dataset, PatternValue, RuleSet};
use crate::similarity::{Levenshtein, Similarity};
use crate::violation::{detect_all, DirtyState, ViolationIndex};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "new_value", rename_all = "snake_case")]
pub enum Feedback {
    Confirm,
    Reject,
    Retain,
    Replace(String),
}

impl Feedback {
    pub fn label(&self) -> &'static str {
        match self {
            Feedback::Confirm => "confirm",
            Feedback::Reject => "reject",
            Feedback::Retain => "retain",
            Feedback::Replace(_) => "replace",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    User,
    Model,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedChange {
    pub row: usize,
    pub attr: AttrId,
    pub old: String,
    pub new: String,
    pub source: Source,
}

/// Everything one feedback event did to the state.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChangeSet {
    pub decided: Option<CandidateUpdate>,
    pub applied: Vec<AppliedChange>,
    pub discarded: Vec<CandidateUpdate>,
    pub created: Vec<CandidateUpdate>,
}

impl ChangeSet {
    pub fn system_applied(&self) -> impl Iterator<Item = &AppliedChange> {
        self.applied.iter().filter(|c| c.source == Source::System)
    }
}

type Cell = (usize, AttrId);

#[derive(Clone)]
pub struct RepairState {
    data: Dataset,
    rules: Arc<RuleSet>,
    index: ViolationIndex,
    dirty: DirtyState,
    cells: CellStates,
    values: ValueIndex,
    sim: Arc<dyn Similarity>,
    pending: BTreeMap<Cell, CandidateUpdate>,
    dependents: HashMap<Dep, BTreeSet<Cell>>,
    group_versions: HashMap<(usize, Vec<String>), u64>,
    versions: Vec<u64>,
    clock: u64,
    seq: u64,
}

impl std::fmt::Debug for RepairState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RepairState")
            .field("tuples", &self.data.len())
            .field("rules", &self.rules.len())
            .field("dirty", &self.dirty.len())
            .field("pending", &self.pending.len())
            .finish()
    }
}

impl RepairState {
    /// Detects violations; call [`RepairState::generate_all`] to populate
    /// the pending updates.
    pub fn new(data: Dataset, rules: Arc<RuleSet>) -> Self {
        Self::with_similarity(data, rules, Arc::new(Levenshtein))
    }

    pub fn with_similarity(data: Dataset, rules: Arc<RuleSet>, sim: Arc<dyn Similarity>) -> Self {
        let (dirty, index) = detect_all(&data, Arc::clone(&rules));
        let cells = CellStates::new(data.len(), data.schema().len());
        let values = ValueIndex::build(&data);
        let versions = vec![0; data.len() * data.schema().len()];
        RepairState {
            data,
            rules,
            index,
            dirty,
            cells,
            values,
            sim,
            pending: BTreeMap::new(),
            dependents: HashMap::new(),
            group_versions: HashMap::new(),
            versions,
            clock: 0,
            seq: 0,
        }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.rules
    }

    pub fn index(&self) -> &ViolationIndex {
        &self.index
    }

    pub fn dirty(&self) -> &DirtyState {
        &self.dirty
    }

    pub fn cells(&self) -> &CellStates {
        &self.cells
    }

    pub fn similarity(&self) -> &dyn Similarity {
        self.sim.as_ref()
    }

    pub fn total_violations(&self) -> f64 {
        self.index.total_violations()
    }

    /// Pending updates in (row, attribute) order.
    pub fn pending(&self) -> impl Iterator<Item = &CandidateUpdate> {
        self.pending.values()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn pending_for(&self, row: usize, attr: AttrId) -> Option<&CandidateUpdate> {
        self.pending.get(&(row, attr))
    }

    pub fn get(&self, id: UpdateId) -> Option<&CandidateUpdate> {
        self.pending.get(&(id.row, id.attr)).filter(|u| u.id == id)
    }

    pub fn context(&self) -> GenContext<'_> {
        GenContext {
            data: &self.data,
            index: &self.index,
            dirty: &self.dirty,
            cells: &self.cells,
            values: &self.values,
            sim: self.sim.as_ref(),
        }
    }

    /// Runs candidate generation for every (dirty tuple, attribute) pair.
    /// Returns the number of updates created.
    pub fn generate_all(&mut self) -> usize {
        let ctx = self.context();
        let attrs: Vec<AttrId> = self.data.schema().attr_ids().collect();
        let rows: Vec<usize> = self.dirty.dirty_rows().iter().copied().collect();
        let proposals: Vec<(Cell, Proposal)> = rows
            .par_iter()
            .flat_map_iter(|&row| {
                attrs
                    .iter()
                    .filter_map(move |&a| update_attribute_tuple(&ctx, row, a).map(|p| ((row, a), p)))
            })
            .collect();
        let n = proposals.len();
        for ((row, attr), p) in proposals {
            self.insert(row, attr, p);
        }
        n
    }

    fn insert(&mut self, row: usize, attr: AttrId, p: Proposal) -> CandidateUpdate {
        self.remove_pending((row, attr));
        self.seq += 1;
        let u = CandidateUpdate {
            id: UpdateId {
                row,
                attr,
                seq: self.seq,
            },
            row,
            attr,
            current: self.data.cell(row, attr).to_string(),
            value: p.value,
            score: p.score,
            scenario: p.scenario,
            freq: p.freq,
            footprint: p.footprint,
            stamp: self.clock,
            status: UpdateStatus::Pending,
        };
        for c in &u.footprint {
            self.dependents.entry(c.clone()).or_default().insert((row, attr));
        }
        self.pending.insert((row, attr), u.clone());
        u
    }

    fn remove_pending(&mut self, cell: Cell) -> Option<CandidateUpdate> {
        let u = self.pending.remove(&cell)?;
        for c in &u.footprint {
            if let Some(set) = self.dependents.get_mut(c) {
                set.remove(&cell);
                if set.is_empty() {
                    self.dependents.remove(c);
                }
            }
        }
        Some(u)
    }

    fn regenerate(&mut self, row: usize, attr: AttrId) -> Option<CandidateUpdate> {
        let p = update_attribute_tuple(&self.context(), row, attr)?;
        Some(self.insert(row, attr, p))
    }

    /// Registers an externally suggested value for a cell, replacing its
    /// pending update if any.
    pub fn propose(&mut self, row: usize, attr: AttrId, value: &str) -> Result<CandidateUpdate> {
        if row >= self.data.len() {
            return Err(Error::UnknownTuple(row.to_string()));
        }
        if attr.0 >= self.data.schema().len() {
            return Err(Error::UnknownAttributeName(attr.0.to_string()));
        }
        if !self.cells.changeable(row, attr) {
            return Err(Error::InvalidFeedback("cell is frozen".into()));
        }
        let current = self.data.cell(row, attr);
        if value == current {
            return Err(Error::InvalidFeedback(
                "suggested value equals the current value".into(),
            ));
        }
        if self.cells.is_prevented(row, attr, value) {
            return Err(Error::InvalidFeedback(format!("`{value}` was rejected for this cell")));
        }
        let p = Proposal {
            score: self.sim.similarity(current, value),
            value: value.to_string(),
            scenario: Scenario::Proposed,
            freq: 1,
            footprint: footprint(&self.context(), row, attr),
        };
        Ok(self.insert(row, attr, p))
    }

    pub fn apply_feedback(&mut self, id: UpdateId, feedback: Feedback, source: Source) -> Result<ChangeSet> {
        let Some(u) = self.get(id).cloned() else {
            return Err(Error::StaleUpdate(id.to_string()));
        };
        if let Feedback::Replace(v) = &feedback {
            if v.is_empty() || *v == u.value {
                return Err(Error::InvalidFeedback(
                    "replace needs a non-empty value different from the suggestion".into(),
                ));
            }
        }
        let (row, attr) = (u.row, u.attr);
        let mut out = ChangeSet::default();
        let mut decided = self.remove_pending((row, attr)).expect("looked up above");
        match feedback {
            Feedback::Retain => {
                self.cells.get_mut(row, attr).changeable = false;
                decided.status = UpdateStatus::Retained;
            }
            Feedback::Reject => {
                self.cells.get_mut(row, attr).prevented.insert(u.value.clone());
                decided.status = UpdateStatus::Rejected;
                if let Some(c) = self.regenerate(row, attr) {
                    out.created.push(c);
                }
            }
            Feedback::Confirm => {
                decided.status = UpdateStatus::Confirmed;
                self.write(row, attr, &u.value, true, source, &mut out);
            }
            Feedback::Replace(v) => {
                decided.status = UpdateStatus::Replaced;
                self.cells.get_mut(row, attr).prevented.insert(u.value.clone());
                self.write(row, attr, &v, true, source, &mut out);
            }
        }
        out.decided = Some(decided);
        Ok(out)
    }

    /// A change made outside the repair loop (e.g. by another writer). The
    /// cell stays changeable.
    pub fn external_change(&mut self, row: usize, attr: AttrId, value: &str) -> Result<ChangeSet> {
        if row >= self.data.len() {
            return Err(Error::UnknownTuple(row.to_string()));
        }
        let mut out = ChangeSet::default();
        if let Some(mut u) = self.remove_pending((row, attr)) {
            u.status = UpdateStatus::Discarded;
            out.discarded.push(u);
        }
        self.write(row, attr, value, false, Source::System, &mut out);
        Ok(out)
    }

    fn write(&mut self, row: usize, attr: AttrId, value: &str, freeze: bool, source: Source, out: &mut ChangeSet) {
        let mut queue: VecDeque<(Cell, String, bool, Source)> = VecDeque::new();
        queue.push_back(((row, attr), value.to_string(), freeze, source));
        let mut revisit: BTreeSet<Cell> = BTreeSet::new();
        let width = self.data.schema().len();
        let rules = Arc::clone(&self.rules);

        while let Some(((row, attr), value, freeze, source)) = queue.pop_front() {
            if freeze {
                self.cells.get_mut(row, attr).changeable = false;
            }
            let old = self.data.cell(row, attr).to_string();
            if old != value {
                let mut groups: Vec<(usize, Vec<String>)> = rules
                    .mentioning(attr)
                    .iter()
                    .filter_map(|&ri| self.index.group_key(ri, &self.data, row).map(|k| (ri, k)))
                    .collect();
                let delta = self.index.apply_change(&mut self.data, row, attr, &value);
                self.dirty.apply(&delta);
                self.values.update(row, attr, &old, &value);
                self.clock += 1;
                self.versions[row * width + attr.0] = self.clock;
                out.applied.push(AppliedChange {
                    row,
                    attr,
                    old,
                    new: value.clone(),
                    source,
                });
                groups.extend(
                    rules
                        .mentioning(attr)
                        .iter()
                        .filter_map(|&ri| self.index.group_key(ri, &self.data, row).map(|k| (ri, k))),
                );
                if let Some(deps) = self.dependents.get(&Dep::Cell(row, attr)) {
                    revisit.extend(deps.iter().copied());
                }
                for (ri, key) in groups {
                    if let Some(deps) = self.dependents.get(&Dep::Group(ri, key.clone())) {
                        revisit.extend(deps.iter().copied());
                    }
                    self.group_versions.insert((ri, key), self.clock);
                }
                for c in &delta.changes {
                    for a in rules.rule(c.rule).attrs() {
                        revisit.insert((c.row, a));
                    }
                }
            }
            for &ri in rules.mentioning(attr) {
                let r = rules.rule(ri);
                if self.index.count(ri, &self.data, row) == 0 {
                    continue;
                }
                match &r.rhs_pattern {
                    PatternValue::Const(c) => {
                        let lhs_frozen = r.lhs.iter().all(|&x| !self.cells.changeable(row, x));
                        if lhs_frozen && self.cells.changeable(row, r.rhs) {
                            queue.push_back(((row, r.rhs), c.clone(), true, Source::System));
                        } else {
                            revisit.extend(r.attrs().filter(|&a| a != attr).map(|a| (row, a)));
                        }
                    }
                    PatternValue::Wildcard => {
                        revisit.extend(r.attrs().filter(|&a| a != attr).map(|a| (row, a)));
                        for p in self.index.partners(ri, &self.data, row) {
                            revisit.extend(r.attrs().map(|a| (p, a)));
                        }
                    }
                }
            }
        }

        let frozen: Vec<Cell> = self
            .pending
            .keys()
            .copied()
            .filter(|&(r, a)| !self.cells.changeable(r, a))
            .collect();
        for cell in revisit.iter().copied().chain(frozen) {
            if let Some(mut u) = self.remove_pending(cell) {
                u.status = UpdateStatus::Discarded;
                out.discarded.push(u);
            }
        }
        for (row, attr) in revisit {
            if let Some(c) = self.regenerate(row, attr) {
                out.created.push(c);
            }
        }
    }

    /// Rebuilds index and dirty list from the data and checks every pending
    /// update against the current cells. Empty means healthy.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let (fresh_dirty, fresh_index) = detect_all(&self.data, Arc::clone(&self.rules));
        if !self.index.same_as(&fresh_index) {
            issues.push("violation index differs from a rebuild".to_string());
        }
        for row in 0..self.data.len() {
            let kept = self.dirty.violated_rules(row);
            let actual = fresh_dirty.violated_rules(row);
            if kept != actual {
                issues.push(format!(
                    "tuple {} violates {:?} but its list holds {:?}",
                    self.data.tuple(row).id,
                    actual,
                    kept
                ));
            }
            if fresh_dirty.is_dirty(row) != self.dirty.is_dirty(row) {
                issues.push(format!("tuple {} dirty flag is out of date", self.data.tuple(row).id));
            }
        }
        let width = self.data.schema().len();
        for u in self.pending.values() {
            let id = &u.id;
            if !self.cells.changeable(u.row, u.attr) {
                issues.push(format!("update {id} targets a frozen cell"));
            }
            if self.cells.is_prevented(u.row, u.attr, &u.value) {
                issues.push(format!("update {id} suggests a prevented value"));
            }
            let current = self.data.cell(u.row, u.attr);
            if u.current != current || u.value == current {
                issues.push(format!("update {id} was generated against a different value"));
            }
            if (u.score - self.sim.similarity(current, &u.value)).abs() > 1e-12 {
                issues.push(format!("update {id} carries a stale score"));
            }
            for dep in &u.footprint {
                let version = match dep {
                    Dep::Cell(r, a) => self.versions[r * width + a.0],
                    Dep::Group(ri, key) => self.group_versions.get(&(*ri, key.clone())).copied().unwrap_or(0),
                };
                if version > u.stamp {
                    issues.push(format!("update {id} depends on a cell modified after it was generated"));
                    break;
                }
            }
        }
        issues
    }

    /// Writes a cell behind the state's back. Only for testing the checker.
    #[doc(hidden)]
    pub fn corrupt_cell(&mut self, row: usize, attr: AttrId, value: &str) {
        self.data.set_cell(row, attr, value.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn state() -> RepairState {
        let (d, rules) = fixtures::figure1();
        let mut s = RepairState::new(d, rules);
        s.generate_all();
        s
    }

    fn cell(s: &RepairState, t: &str, a: &str) -> (usize, AttrId) {
        (s.data().row_of(&t.into()).unwrap(), s.data().schema().attr(a).unwrap())
    }

    #[test]
    fn fresh_state_is_healthy_and_groups_michigan_city() {
        let s = state();
        assert!(s.check_invariants().is_empty());
        let mc: Vec<String> = s
            .pending()
            .filter(|u| u.value == "Michigan City")
            .map(|u| s.data().tuple(u.row).id.to_string())
            .collect();
        assert_eq!(mc, ["t2", "t3", "t4"]);
    }

    #[test]
    fn confirming_t6_zip_forces_city_and_drops_old_proposal() {
        let mut s = state();
        let (t6, ct) = cell(&s, "t6", "CT");
        let r2 = s.propose(t6, ct, "FT Wayne").unwrap();
        let zip = s.data().schema().attr("ZIP").unwrap();
        let r1 = s.pending_for(t6, zip).unwrap().clone();
        assert_eq!(r1.value, "46391");
        let cs = s.apply_feedback(r1.id, Feedback::Confirm, Source::User).unwrap();
        assert!(cs.discarded.iter().any(|u| u.id == r2.id));
        let forced: Vec<_> = cs.system_applied().collect();
        assert_eq!(forced.len(), 1);
        assert_eq!(
            (forced[0].row, forced[0].attr, forced[0].new.as_str()),
            (t6, ct, "Westville")
        );
        assert!(!s.cells().changeable(t6, ct));
        assert!(s.check_invariants().is_empty());
        assert!(matches!(
            s.apply_feedback(r1.id, Feedback::Confirm, Source::User),
            Err(Error::StaleUpdate(_))
        ));
    }

    #[test]
    fn retain_and_reject() {
        let mut s = state();
        let (t2, ct) = cell(&s, "t2", "CT");
        let u = s.pending_for(t2, ct).unwrap().clone();
        let cs = s.apply_feedback(u.id, Feedback::Reject, Source::User).unwrap();
        assert!(s.cells().is_prevented(t2, ct, "Michigan City"));
        assert!(cs.created.iter().all(|c| c.value != "Michigan City"));
        assert!(s.pending_for(t2, ct).is_none());
        let (_, zip) = cell(&s, "t2", "ZIP");
        let z = s.pending_for(t2, zip).unwrap().clone();
        let cs = s.apply_feedback(z.id, Feedback::Retain, Source::User).unwrap();
        assert!(cs.applied.is_empty() && cs.created.is_empty());
        assert_eq!(s.data().cell(t2, zip), "46360");
        assert!(!s.cells().changeable(t2, zip));
        assert!(s.pending_for(t2, zip).is_none());
        assert!(s.check_invariants().is_empty());
    }

    #[test]
    fn seeded_fault_is_reported() {
        let mut s = state();
        let (t7, zip) = cell(&s, "t7", "ZIP");
        s.corrupt_cell(t7, zip, "00000");
        assert!(!s.check_invariants().is_empty());
    }
}
