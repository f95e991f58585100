//! Violation detection and incremental maintenance.
//!
//! Counting follows the pairwise convention: a constant rule contributes 1
//! per violating tuple, a variable rule contributes, for each in-context
//! tuple, the number of tuples with the same LHS values and a different RHS
//! value. A disagreeing pair therefore adds 2 to the total. Weighted totals
//! scale each tuple's count by its weight.
//!
//! Variable rules are indexed by LHS key. Each group keeps a histogram of
//! RHS values, which makes per-tuple counts `n - h(t[A])` and the group's
//! weighted total `n * W - sum_x W(x) * h(x)` cheap to maintain.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::model::{AttrId, CfdRule, Dataset, PatternValue, RuleSet};

#[derive(Debug, Clone, Default, PartialEq)]
struct Hist {
    values: BTreeMap<String, (usize, f64)>,
    n: usize,
    w: f64,
}

impl Hist {
    fn add(&mut self, value: &str, weight: f64) {
        let e = self.values.entry(value.to_string()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += weight;
        self.n += 1;
        self.w += weight;
    }

    fn remove(&mut self, value: &str, weight: f64) {
        if let Some(e) = self.values.get_mut(value) {
            e.0 -= 1;
            e.1 -= weight;
            if e.0 == 0 {
                self.values.remove(value);
            }
        }
        self.n -= 1;
        self.w -= weight;
        if self.n == 0 {
            self.w = 0.0;
        }
    }

    fn count_of(&self, value: &str) -> usize {
        self.values.get(value).map_or(0, |e| e.0)
    }

    fn violations(&self) -> f64 {
        if self.values.len() <= 1 {
            return 0.0;
        }
        let agree: f64 = self.values.values().map(|&(h, w)| w * h as f64).sum();
        self.n as f64 * self.w - agree
    }

    fn satisfying(&self) -> usize {
        if self.values.len() == 1 {
            self.n
        } else {
            0
        }
    }
}

/// A histogram with at most one value taken out and one put in, read
/// without copying the base.
struct Edited<'a> {
    base: &'a Hist,
    out: Option<(&'a str, f64)>,
    inn: Option<(&'a str, f64)>,
}

impl Edited<'_> {
    fn entry(&self, v: &str) -> (usize, f64) {
        let (mut c, mut w) = self.base.values.get(v).copied().unwrap_or((0, 0.0));
        if let Some((o, ow)) = self.out {
            if o == v {
                c -= 1;
                w -= ow;
            }
        }
        if let Some((i, iw)) = self.inn {
            if i == v {
                c += 1;
                w += iw;
            }
        }
        (c, w)
    }

    fn n(&self) -> usize {
        self.base.n + usize::from(self.inn.is_some()) - usize::from(self.out.is_some())
    }

    fn count_of(&self, v: &str) -> usize {
        self.entry(v).0
    }

    fn touched(&self) -> impl Iterator<Item = &str> {
        let o = self.out.map(|x| x.0);
        let i = self.inn.map(|x| x.0).filter(|i| Some(*i) != o);
        o.into_iter().chain(i)
    }

    fn distinct(&self) -> usize {
        let mut d = self.base.values.len() as isize;
        for v in self.touched() {
            let before = self.base.values.get(v).map_or(0, |e| e.0);
            let after = self.entry(v).0;
            d += isize::from(after > 0) - isize::from(before > 0);
        }
        d.max(0) as usize
    }

    fn violations(&self) -> f64 {
        if self.distinct() <= 1 {
            return 0.0;
        }
        let mut agree: f64 = self.base.values.values().map(|&(h, w)| w * h as f64).sum();
        for v in self.touched() {
            let (c0, w0) = self.base.values.get(v).copied().unwrap_or((0, 0.0));
            let (c1, w1) = self.entry(v);
            agree += w1 * c1 as f64 - w0 * c0 as f64;
        }
        let mut w = self.base.w;
        if let Some((_, ow)) = self.out {
            w -= ow;
        }
        if let Some((_, iw)) = self.inn {
            w += iw;
        }
        self.n() as f64 * w - agree
    }

    fn satisfying(&self) -> usize {
        if self.distinct() == 1 {
            self.n()
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Group {
    members: BTreeSet<usize>,
    hist: Hist,
}

#[derive(Debug, Clone, PartialEq)]
enum RuleIndex {
    Constant {
        context: BTreeSet<usize>,
        violators: BTreeSet<usize>,
        vio: f64,
    },
    Variable {
        groups: HashMap<Vec<String>, Group>,
        context: usize,
        vio: f64,
        sat: usize,
    },
}

/// A hypothetical single-cell change `t[attr] := value` on `row`.
#[derive(Debug, Clone, Copy)]
pub struct Overlay<'a> {
    pub row: usize,
    pub attr: AttrId,
    pub value: &'a str,
}

impl<'a> Overlay<'a> {
    pub fn new(row: usize, attr: AttrId, value: &'a str) -> Self {
        Overlay { row, attr, value }
    }

    fn cell<'d>(&self, data: &'d Dataset, row: usize, attr: AttrId) -> &'d str
    where
        'a: 'd,
    {
        if row == self.row && attr == self.attr {
            self.value
        } else {
            data.cell(row, attr)
        }
    }
}

/// Rule-level counts after a hypothetical change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleProbe {
    pub vio_before: f64,
    pub vio_after: f64,
    pub sat_before: usize,
    pub sat_after: usize,
    /// Violation count of the changed tuple itself after the change.
    pub row_count_after: usize,
}

/// One (rule, tuple) pair whose violation count changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusChange {
    pub rule: usize,
    pub row: usize,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ChangeDelta {
    pub row: usize,
    pub attr: Option<AttrId>,
    pub old_value: String,
    pub new_value: String,
    pub changes: Vec<StatusChange>,
}

impl ChangeDelta {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// Rules whose violation set changed.
    pub fn rules(&self) -> BTreeSet<usize> {
        self.changes.iter().map(|c| c.rule).collect()
    }
}

/// Per-rule violation structures for one dataset.
#[derive(Debug, Clone)]
pub struct ViolationIndex {
    rules: Arc<RuleSet>,
    per_rule: Vec<RuleIndex>,
}

fn lhs_key(rule: &CfdRule, cell: impl Fn(AttrId) -> String) -> Vec<String> {
    rule.lhs.iter().map(|&a| cell(a)).collect()
}

impl ViolationIndex {
    /// LHS values of `row` for a variable rule it is in context of.
    pub fn group_key(&self, rule: usize, data: &Dataset, row: usize) -> Option<Vec<String>> {
        let r = self.rules.rule(rule);
        if r.is_constant() || !self.in_context(rule, data, row) {
            return None;
        }
        Some(lhs_key(r, |a| data.cell(row, a).to_string()))
    }

    pub fn build(data: &Dataset, rules: Arc<RuleSet>) -> Self {
        let mut per_rule = Vec::with_capacity(rules.len());
        for rule in rules.rules() {
            let idx = match &rule.rhs_pattern {
                PatternValue::Const(c) => {
                    let mut context = BTreeSet::new();
                    let mut violators = BTreeSet::new();
                    let mut vio = 0.0;
                    for row in 0..data.len() {
                        if rule.in_context(|a| data.cell(row, a)) {
                            context.insert(row);
                            if data.cell(row, rule.rhs) != c {
                                violators.insert(row);
                                vio += data.weight(row);
                            }
                        }
                    }
                    RuleIndex::Constant {
                        context,
                        violators,
                        vio,
                    }
                }
                PatternValue::Wildcard => {
                    let mut groups: HashMap<Vec<String>, Group> = HashMap::new();
                    let mut context = 0;
                    for row in 0..data.len() {
                        if rule.in_context(|a| data.cell(row, a)) {
                            context += 1;
                            let g = groups
                                .entry(lhs_key(rule, |a| data.cell(row, a).to_string()))
                                .or_default();
                            g.members.insert(row);
                            g.hist.add(data.cell(row, rule.rhs), data.weight(row));
                        }
                    }
                    let vio = groups.values().map(|g| g.hist.violations()).sum();
                    let sat = groups.values().map(|g| g.hist.satisfying()).sum();
                    RuleIndex::Variable {
                        groups,
                        context,
                        vio,
                        sat,
                    }
                }
            };
            per_rule.push(idx);
        }
        ViolationIndex { rules, per_rule }
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.rules
    }

    pub fn in_context(&self, rule: usize, data: &Dataset, row: usize) -> bool {
        match &self.per_rule[rule] {
            RuleIndex::Constant { context, .. } => context.contains(&row),
            RuleIndex::Variable { .. } => self.rules.rule(rule).in_context(|a| data.cell(row, a)),
        }
    }

    /// Unweighted violation count of `row` for `rule`.
    pub fn count(&self, rule: usize, data: &Dataset, row: usize) -> usize {
        match &self.per_rule[rule] {
            RuleIndex::Constant { violators, .. } => usize::from(violators.contains(&row)),
            RuleIndex::Variable { groups, .. } => {
                let r = self.rules.rule(rule);
                if !r.in_context(|a| data.cell(row, a)) {
                    return 0;
                }
                let key = lhs_key(r, |a| data.cell(row, a).to_string());
                groups
                    .get(&key)
                    .map_or(0, |g| g.hist.n - g.hist.count_of(data.cell(row, r.rhs)))
            }
        }
    }

    /// Tuples that violate a variable rule together with `row`, ascending.
    pub fn partners(&self, rule: usize, data: &Dataset, row: usize) -> Vec<usize> {
        match &self.per_rule[rule] {
            RuleIndex::Constant { .. } => Vec::new(),
            RuleIndex::Variable { groups, .. } => {
                let r = self.rules.rule(rule);
                if !r.in_context(|a| data.cell(row, a)) {
                    return Vec::new();
                }
                let key = lhs_key(r, |a| data.cell(row, a).to_string());
                let mine = data.cell(row, r.rhs);
                groups.get(&key).map_or_else(Vec::new, |g| {
                    g.members
                        .iter()
                        .copied()
                        .filter(|&o| data.cell(o, r.rhs) != mine)
                        .collect()
                })
            }
        }
    }

    /// Other in-context tuples sharing `row`'s LHS key (any RHS value).
    pub fn group_of(&self, rule: usize, data: &Dataset, row: usize) -> Vec<usize> {
        match &self.per_rule[rule] {
            RuleIndex::Constant { .. } => Vec::new(),
            RuleIndex::Variable { groups, .. } => {
                let r = self.rules.rule(rule);
                let key = lhs_key(r, |a| data.cell(row, a).to_string());
                groups
                    .get(&key)
                    .map_or_else(Vec::new, |g| g.members.iter().copied().filter(|&o| o != row).collect())
            }
        }
    }

    /// Weighted violation total of one rule.
    pub fn rule_violations(&self, rule: usize) -> f64 {
        match &self.per_rule[rule] {
            RuleIndex::Constant { vio, .. } | RuleIndex::Variable { vio, .. } => *vio,
        }
    }

    /// In-context tuples that do not violate the rule.
    pub fn rule_satisfying(&self, rule: usize) -> usize {
        match &self.per_rule[rule] {
            RuleIndex::Constant { context, violators, .. } => context.len() - violators.len(),
            RuleIndex::Variable { sat, .. } => *sat,
        }
    }

    /// `|D(φ)|`: tuples matching the LHS pattern.
    pub fn context_size(&self, rule: usize) -> usize {
        match &self.per_rule[rule] {
            RuleIndex::Constant { context, .. } => context.len(),
            RuleIndex::Variable { context, .. } => *context,
        }
    }

    pub fn total_violations(&self) -> f64 {
        (0..self.per_rule.len()).map(|r| self.rule_violations(r)).sum()
    }

    /// Counts for `rule` if the overlay were applied. Rules not mentioning
    /// the overlay's attribute come back unchanged.
    pub fn probe(&self, rule: usize, data: &Dataset, ov: Overlay<'_>) -> RuleProbe {
        let r = self.rules.rule(rule);
        let vio_before = self.rule_violations(rule);
        let sat_before = self.rule_satisfying(rule);
        let count_now = self.count(rule, data, ov.row);
        if !r.mentions(ov.attr) || data.cell(ov.row, ov.attr) == ov.value {
            return RuleProbe {
                vio_before,
                vio_after: vio_before,
                sat_before,
                sat_after: sat_before,
                row_count_after: count_now,
            };
        }
        let w = data.weight(ov.row);
        let in_after = r.in_context(|a| ov.cell(data, ov.row, a));
        match (&self.per_rule[rule], &r.rhs_pattern) {
            (RuleIndex::Constant { violators, .. }, PatternValue::Const(c)) => {
                let was_in = self.in_context(rule, data, ov.row);
                let was_vio = violators.contains(&ov.row);
                let is_vio = in_after && ov.cell(data, ov.row, r.rhs) != c;
                let mut vio_after = vio_before;
                if was_vio {
                    vio_after -= w;
                }
                if is_vio {
                    vio_after += w;
                }
                let was_sat = was_in && !was_vio;
                let is_sat = in_after && !is_vio;
                let sat_after = sat_before + usize::from(is_sat) - usize::from(was_sat);
                RuleProbe {
                    vio_before,
                    vio_after,
                    sat_before,
                    sat_after,
                    row_count_after: usize::from(is_vio),
                }
            }
            (RuleIndex::Variable { groups, .. }, _) => {
                let was_in = r.in_context(|a| data.cell(ov.row, a));
                let old_key = lhs_key(r, |a| data.cell(ov.row, a).to_string());
                let new_key = lhs_key(r, |a| ov.cell(data, ov.row, a).to_string());
                let old_val = data.cell(ov.row, r.rhs);
                let new_val = ov.cell(data, ov.row, r.rhs);
                let mut vio_after = vio_before;
                let mut sat_after = sat_before as isize;
                let mut row_count_after = 0;
                let same_group = was_in && in_after && old_key == new_key;
                if same_group {
                    let g = &groups[&old_key];
                    let h = Edited {
                        base: &g.hist,
                        out: Some((old_val, w)),
                        inn: Some((new_val, w)),
                    };
                    vio_after += h.violations() - g.hist.violations();
                    sat_after += h.satisfying() as isize - g.hist.satisfying() as isize;
                    row_count_after = h.n() - h.count_of(new_val);
                } else {
                    if was_in {
                        let g = &groups[&old_key];
                        let h = Edited {
                            base: &g.hist,
                            out: Some((old_val, w)),
                            inn: None,
                        };
                        vio_after += h.violations() - g.hist.violations();
                        sat_after += h.satisfying() as isize - g.hist.satisfying() as isize;
                    }
                    if in_after {
                        let empty = Hist::default();
                        let base = groups.get(&new_key).map_or(&empty, |g| &g.hist);
                        let h = Edited {
                            base,
                            out: None,
                            inn: Some((new_val, w)),
                        };
                        vio_after += h.violations() - base.violations();
                        sat_after += h.satisfying() as isize - base.satisfying() as isize;
                        row_count_after = h.n() - h.count_of(new_val);
                    }
                }
                RuleProbe {
                    vio_before,
                    vio_after,
                    sat_before,
                    sat_after: sat_after.max(0) as usize,
                    row_count_after,
                }
            }
            _ => unreachable!("index kind follows rule kind"),
        }
    }

    /// Unweighted count of the overlay's own row for `rule` after the
    /// change; the same number as [`ViolationIndex::probe`]'s
    /// `row_count_after`, without the rule totals.
    pub fn row_count_after(&self, rule: usize, data: &Dataset, ov: Overlay<'_>) -> usize {
        let r = self.rules.rule(rule);
        if !r.mentions(ov.attr) || data.cell(ov.row, ov.attr) == ov.value {
            return self.count(rule, data, ov.row);
        }
        if !r.in_context(|a| ov.cell(data, ov.row, a)) {
            return 0;
        }
        let new_val = ov.cell(data, ov.row, r.rhs);
        match (&self.per_rule[rule], &r.rhs_pattern) {
            (RuleIndex::Variable { groups, .. }, _) => {
                let key = lhs_key(r, |a| ov.cell(data, ov.row, a).to_string());
                let Some(g) = groups.get(&key) else { return 0 };
                let (n, c) = (g.hist.n, g.hist.count_of(new_val));
                if g.members.contains(&ov.row) {
                    let old = data.cell(ov.row, r.rhs);
                    n - 1 - (c - usize::from(old == new_val))
                } else {
                    n - c
                }
            }
            (_, PatternValue::Const(c)) => usize::from(new_val != c),
            (_, PatternValue::Wildcard) => unreachable!("variable rules have a group index"),
        }
    }

    /// Unweighted count of `other` for `rule` under the overlay.
    pub fn count_under(&self, rule: usize, data: &Dataset, ov: Overlay<'_>, other: usize) -> usize {
        if other == ov.row {
            return self.row_count_after(rule, data, ov);
        }
        let r = self.rules.rule(rule);
        if !r.mentions(ov.attr) {
            return self.count(rule, data, other);
        }
        match &r.rhs_pattern {
            PatternValue::Const(_) => self.count(rule, data, other),
            PatternValue::Wildcard => {
                if !r.in_context(|a| data.cell(other, a)) {
                    return 0;
                }
                let key = lhs_key(r, |a| data.cell(other, a).to_string());
                let mine = data.cell(other, r.rhs);
                let mut n_diff = self.count(rule, data, other) as isize;
                let row_in_before =
                    r.in_context(|a| data.cell(ov.row, a)) && lhs_key(r, |a| data.cell(ov.row, a).to_string()) == key;
                let row_in_after = r.in_context(|a| ov.cell(data, ov.row, a))
                    && lhs_key(r, |a| ov.cell(data, ov.row, a).to_string()) == key;
                if row_in_before && data.cell(ov.row, r.rhs) != mine {
                    n_diff -= 1;
                }
                if row_in_after && ov.cell(data, ov.row, r.rhs) != mine {
                    n_diff += 1;
                }
                n_diff.max(0) as usize
            }
        }
    }

    /// Writes `data[row][attr] := value` and updates every rule mentioning
    /// `attr`. The returned delta lists each (rule, tuple) whose count moved.
    pub fn apply_change(&mut self, data: &mut Dataset, row: usize, attr: AttrId, value: &str) -> ChangeDelta {
        let old_value = data.cell(row, attr).to_string();
        let mut delta = ChangeDelta {
            row,
            attr: Some(attr),
            old_value: old_value.clone(),
            new_value: value.to_string(),
            changes: Vec::new(),
        };
        if old_value == value {
            return delta;
        }
        let rules = Arc::clone(&self.rules);
        let mentioning: Vec<usize> = rules.mentioning(attr).to_vec();
        // affected rows and their counts before the write
        let mut before: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        for &ri in &mentioning {
            let r = rules.rule(ri);
            let mut rows = vec![row];
            if !r.is_constant() {
                let new_in = r.in_context(|a| if a == attr { value } else { data.cell(row, a) });
                let new_key = lhs_key(r, |a| {
                    if a == attr {
                        value.to_string()
                    } else {
                        data.cell(row, a).to_string()
                    }
                });
                rows.extend(self.group_of(ri, data, row));
                if new_in {
                    if let RuleIndex::Variable { groups, .. } = &self.per_rule[ri] {
                        if let Some(g) = groups.get(&new_key) {
                            rows.extend(g.members.iter().copied().filter(|&o| o != row));
                        }
                    }
                }
                rows.sort_unstable();
                rows.dedup();
            }
            let counts = rows.iter().map(|&o| (o, self.count(ri, data, o))).collect();
            before.push((ri, counts));
        }
        for &ri in &mentioning {
            self.remove_row(ri, data, row);
        }
        data.set_cell(row, attr, value.to_string());
        for &ri in &mentioning {
            self.insert_row(ri, data, row);
        }
        for (ri, counts) in before {
            for (o, b) in counts {
                let a = self.count(ri, data, o);
                if a != b {
                    delta.changes.push(StatusChange {
                        rule: ri,
                        row: o,
                        before: b,
                        after: a,
                    });
                }
            }
        }
        delta
    }

    fn remove_row(&mut self, ri: usize, data: &Dataset, row: usize) {
        let r = self.rules.rule(ri);
        let w = data.weight(row);
        match &mut self.per_rule[ri] {
            RuleIndex::Constant {
                context,
                violators,
                vio,
            } => {
                context.remove(&row);
                if violators.remove(&row) {
                    *vio -= w;
                }
            }
            RuleIndex::Variable {
                groups,
                context,
                vio,
                sat,
            } => {
                if !r.in_context(|a| data.cell(row, a)) {
                    return;
                }
                let key = lhs_key(r, |a| data.cell(row, a).to_string());
                let Some(g) = groups.get_mut(&key) else {
                    return;
                };
                let (v0, s0) = (g.hist.violations(), g.hist.satisfying());
                g.members.remove(&row);
                g.hist.remove(data.cell(row, r.rhs), w);
                *vio += g.hist.violations() - v0;
                *sat = *sat + g.hist.satisfying() - s0;
                *context -= 1;
                if g.members.is_empty() {
                    groups.remove(&key);
                }
            }
        }
    }

    fn insert_row(&mut self, ri: usize, data: &Dataset, row: usize) {
        let r = self.rules.rule(ri);
        let w = data.weight(row);
        if !r.in_context(|a| data.cell(row, a)) {
            return;
        }
        match &mut self.per_rule[ri] {
            RuleIndex::Constant {
                context,
                violators,
                vio,
            } => {
                context.insert(row);
                if let PatternValue::Const(c) = &r.rhs_pattern {
                    if data.cell(row, r.rhs) != c {
                        violators.insert(row);
                        *vio += w;
                    }
                }
            }
            RuleIndex::Variable {
                groups,
                context,
                vio,
                sat,
            } => {
                let g = groups.entry(lhs_key(r, |a| data.cell(row, a).to_string())).or_default();
                let (v0, s0) = (g.hist.violations(), g.hist.satisfying());
                g.members.insert(row);
                g.hist.add(data.cell(row, r.rhs), w);
                *vio += g.hist.violations() - v0;
                *sat = *sat + g.hist.satisfying() - s0;
                *context += 1;
            }
        }
    }

    /// Structural equality with a freshly built index (floating totals
    /// compared with a small tolerance).
    pub fn same_as(&self, other: &ViolationIndex) -> bool {
        if self.per_rule.len() != other.per_rule.len() {
            return false;
        }
        self.per_rule.iter().zip(&other.per_rule).all(|(a, b)| match (a, b) {
            (
                RuleIndex::Constant {
                    context: c1,
                    violators: v1,
                    vio: x1,
                },
                RuleIndex::Constant {
                    context: c2,
                    violators: v2,
                    vio: x2,
                },
            ) => c1 == c2 && v1 == v2 && (x1 - x2).abs() < 1e-6,
            (
                RuleIndex::Variable {
                    groups: g1,
                    context: c1,
                    vio: x1,
                    sat: s1,
                },
                RuleIndex::Variable {
                    groups: g2,
                    context: c2,
                    vio: x2,
                    sat: s2,
                },
            ) => {
                c1 == c2
                    && s1 == s2
                    && (x1 - x2).abs() < 1e-6
                    && g1.len() == g2.len()
                    && g1.iter().all(|(k, g)| {
                        g2.get(k).is_some_and(|h| {
                            g.members == h.members
                                && g.hist.n == h.hist.n
                                && g.hist.values.len() == h.hist.values.len()
                                && g.hist
                                    .values
                                    .iter()
                                    .all(|(v, (c, _))| h.hist.values.get(v).is_some_and(|(c2, _)| c == c2))
                        })
                    })
            }
            _ => false,
        })
    }
}

/// DirtyTuples and each tuple's violated-rule list, by row.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirtyState {
    vio_rules: Vec<BTreeSet<usize>>,
    dirty: BTreeSet<usize>,
}

impl DirtyState {
    pub fn from_index(index: &ViolationIndex, data: &Dataset) -> Self {
        let mut vio_rules = vec![BTreeSet::new(); data.len()];
        for ri in 0..index.rules.len() {
            match &index.per_rule[ri] {
                RuleIndex::Constant { violators, .. } => {
                    for &row in violators {
                        vio_rules[row].insert(ri);
                    }
                }
                RuleIndex::Variable { groups, .. } => {
                    for g in groups.values() {
                        if g.hist.values.len() > 1 {
                            for &row in &g.members {
                                vio_rules[row].insert(ri);
                            }
                        }
                    }
                }
            }
        }
        let dirty = (0..data.len()).filter(|&r| !vio_rules[r].is_empty()).collect();
        DirtyState { vio_rules, dirty }
    }

    pub fn apply(&mut self, delta: &ChangeDelta) {
        for c in &delta.changes {
            if c.after > 0 {
                self.vio_rules[c.row].insert(c.rule);
                self.dirty.insert(c.row);
            } else {
                self.vio_rules[c.row].remove(&c.rule);
                if self.vio_rules[c.row].is_empty() {
                    self.dirty.remove(&c.row);
                }
            }
        }
    }

    pub fn is_dirty(&self, row: usize) -> bool {
        self.dirty.contains(&row)
    }

    pub fn dirty_rows(&self) -> &BTreeSet<usize> {
        &self.dirty
    }

    pub fn len(&self) -> usize {
        self.dirty.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirty.is_empty()
    }

    /// `t.vioRuleList` as rule indices.
    pub fn violated_rules(&self, row: usize) -> &BTreeSet<usize> {
        &self.vio_rules[row]
    }

    /// Test hook: drop a tuple from the dirty list without touching the rules.
    #[doc(hidden)]
    pub fn corrupt_remove(&mut self, row: usize) {
        self.dirty.remove(&row);
        self.vio_rules[row].clear();
    }
}

pub fn detect_all(data: &Dataset, rules: Arc<RuleSet>) -> (DirtyState, ViolationIndex) {
    let index = ViolationIndex::build(data, rules);
    let dirty = DirtyState::from_index(&index, data);
    (dirty, index)
}

pub fn tuple_violation_count(data: &Dataset, index: &ViolationIndex, row: usize, rule: usize) -> usize {
    index.count(rule, data, row)
}

/// Weighted `vio(D, Σ)`.
pub fn total_violations(data: &Dataset, rules: &RuleSet) -> f64 {
    ViolationIndex::build(data, Arc::new(rules.clone())).total_violations()
}

/// In-context tuples that satisfy `rule`.
pub fn satisfying_count(data: &Dataset, rule: &CfdRule) -> usize {
    let context: Vec<usize> = (0..data.len())
        .filter(|&r| rule.in_context(|a| data.cell(r, a)))
        .collect();
    match &rule.rhs_pattern {
        PatternValue::Const(c) => context.iter().filter(|&&r| data.cell(r, rule.rhs) == c).count(),
        PatternValue::Wildcard => {
            let mut groups: HashMap<Vec<&str>, BTreeSet<&str>> = HashMap::new();
            for &r in &context {
                let key = rule.lhs.iter().map(|&a| data.cell(r, a)).collect();
                groups.entry(key).or_default().insert(data.cell(r, rule.rhs));
            }
            context
                .iter()
                .filter(|&&r| {
                    let key: Vec<&str> = rule.lhs.iter().map(|&a| data.cell(r, a)).collect();
                    groups[&key].len() == 1
                })
                .count()
        }
    }
}

/// Counts for a source rule read jointly: violations add up over its
/// normalized pieces, and a tuple satisfies it only when it is in context
/// and satisfies every piece.
pub fn joint_source_stats(
    data: &Dataset,
    index: &ViolationIndex,
    pieces: &[usize],
    overlay: Option<Overlay<'_>>,
) -> (f64, usize) {
    let rules = index.rules();
    let mut vio = 0.0;
    for &p in pieces {
        vio += match overlay {
            Some(ov) => index.probe(p, data, ov).vio_after,
            None => index.rule_violations(p),
        };
    }
    let mut sat = 0;
    for row in 0..data.len() {
        let ok = pieces.iter().all(|&p| {
            let r = rules.rule(p);
            let in_ctx = match overlay {
                Some(ov) => r.in_context(|a| ov.cell(data, row, a)),
                None => r.in_context(|a| data.cell(row, a)),
            };
            in_ctx
                && match overlay {
                    Some(ov) => index.count_under(p, data, ov, row) == 0,
                    None => index.count(p, data, row) == 0,
                }
        });
        if ok {
            sat += 1;
        }
    }
    (vio, sat)
}
