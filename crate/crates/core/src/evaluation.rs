//! Ground-truth metrics, error injection and experiment reports.
//!
//! Quality loss against a clean instance `D_opt` is
//! `Σ_i w_i · vio(D, φ_i) / max(1, |D_opt ⊨ φ_i|)`, with the weights
//! `w_i = |D_opt(φ_i)| / |D_opt|` fixed on the clean instance. This module
//! is the only place that reads `D_opt`; ranking never does.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consistency::AppliedChange;
use crate::error::Result;
use crate::model::{AttrId, Dataset, RuleSet};
use crate::orchestrator::{SessionConfig, SessionEvent, Strategy};
use crate::violation::{satisfying_count, ViolationIndex};

/// Loss evaluator with weights and denominators taken from the clean data.
#[derive(Debug, Clone)]
pub struct QualityMeter {
    weights: Vec<f64>,
    denominators: Vec<f64>,
}

impl QualityMeter {
    pub fn new(truth: &Dataset, rules: &RuleSet) -> Self {
        let n = truth.len().max(1) as f64;
        let mut weights = Vec::with_capacity(rules.len());
        let mut denominators = Vec::with_capacity(rules.len());
        for r in rules.rules() {
            let context = (0..truth.len())
                .filter(|&row| r.in_context(|a| truth.cell(row, a)))
                .count();
            weights.push(context as f64 / n);
            denominators.push(satisfying_count(truth, r).max(1) as f64);
        }
        QualityMeter { weights, denominators }
    }

    pub fn loss(&self, index: &ViolationIndex) -> f64 {
        (0..self.weights.len())
            .map(|i| self.weights[i] * index.rule_violations(i) / self.denominators[i])
            .sum()
    }
}

pub fn quality_loss(data: &Dataset, rules: &Arc<RuleSet>, truth: &Dataset) -> f64 {
    QualityMeter::new(truth, rules).loss(&ViolationIndex::build(data, Arc::clone(rules)))
}

/// `(initial − current) / initial` clamped to `[0, 1]`; 1 when there was
/// nothing to improve.
pub fn improvement(initial_loss: f64, current_loss: f64) -> f64 {
    if initial_loss <= 0.0 {
        return 1.0;
    }
    ((initial_loss - current_loss) / initial_loss).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// False when nothing was changed; precision is then reported as 1.
    pub precision_defined: bool,
    pub changed_cells: usize,
    pub correct_cells: usize,
    pub wrong_cells_initially: usize,
}

/// Precision and recall of a change log. A cell written several times counts
/// once, with its last value.
pub fn precision_recall(changes: &[AppliedChange], initial: &Dataset, truth: &Dataset) -> PrecisionRecall {
    let mut last: BTreeMap<(usize, AttrId), &str> = BTreeMap::new();
    for c in changes {
        last.insert((c.row, c.attr), &c.new);
    }
    last.retain(|&(row, attr), v| *v != initial.cell(row, attr));
    let correct = last
        .iter()
        .filter(|(&(row, attr), v)| **v == truth.cell(row, attr))
        .count();
    let wrong = (0..initial.len())
        .map(|row| {
            initial
                .schema()
                .attr_ids()
                .filter(|&a| initial.cell(row, a) != truth.cell(row, a))
                .count()
        })
        .sum::<usize>();
    let fixed = last
        .iter()
        .filter(|(&(row, attr), v)| **v == truth.cell(row, attr) && initial.cell(row, attr) != truth.cell(row, attr))
        .count();
    PrecisionRecall {
        precision: if last.is_empty() {
            1.0
        } else {
            correct as f64 / last.len() as f64
        },
        recall: if wrong == 0 { 0.0 } else { fixed as f64 / wrong as f64 },
        precision_defined: !last.is_empty(),
        changed_cells: last.len(),
        correct_cells: correct,
        wrong_cells_initially: wrong,
    }
}

/// Diff-based recomputation of [`precision_recall`] from final data.
pub fn precision_recall_from_data(initial: &Dataset, fin: &Dataset, truth: &Dataset) -> PrecisionRecall {
    let mut changes = Vec::new();
    for row in 0..initial.len() {
        for a in initial.schema().attr_ids() {
            if initial.cell(row, a) != fin.cell(row, a) {
                changes.push(AppliedChange {
                    row,
                    attr: a,
                    old: initial.cell(row, a).to_string(),
                    new: fin.cell(row, a).to_string(),
                    source: crate::consistency::Source::System,
                });
            }
        }
    }
    precision_recall(&changes, initial, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    /// Fraction of tuples that receive errors.
    pub tuple_rate: f64,
    /// Probability of a character edit rather than a domain swap.
    pub char_edit_prob: f64,
    /// Attributes that may be perturbed; all of them when `None`.
    pub attributes: Option<Vec<AttrId>>,
    pub seed: u64,
}

impl Default for ErrorSpec {
    fn default() -> Self {
        ErrorSpec {
            tuple_rate: 0.30,
            char_edit_prob: 0.5,
            attributes: None,
            seed: 0,
        }
    }
}

fn char_edit<R: Rng>(value: &str, alphabet: &[char], rng: &mut R) -> String {
    let mut chars: Vec<char> = value.chars().collect();
    let edits = rng.gen_range(1..=2);
    for _ in 0..edits {
        match rng.gen_range(0..3) {
            0 if !chars.is_empty() => {
                let i = rng.gen_range(0..chars.len());
                let others: Vec<char> = alphabet.iter().copied().filter(|&c| c != chars[i]).collect();
                if let Some(&c) = others.choose(rng) {
                    chars[i] = c;
                }
            }
            1 if chars.len() > 1 => {
                let i = rng.gen_range(0..chars.len());
                chars.remove(i);
            }
            _ => {
                let i = rng.gen_range(0..=chars.len());
                chars.insert(i, *alphabet.choose(rng).unwrap_or(&'x'));
            }
        }
    }
    let out: String = chars.into_iter().collect();
    if out == value {
        format!("{value}{}", alphabet.first().copied().unwrap_or('x'))
    } else {
        out
    }
}

/// Perturbs exactly `round(rate · n)` tuples chosen without replacement;
/// each gets between 1 and `ceil(m / 3)` perturbed attributes.
pub fn inject_errors(clean: &Dataset, spec: &ErrorSpec) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&spec.tuple_rate) || !(0.0..=1.0).contains(&spec.char_edit_prob) {
        return Err(crate::error::Error::InvalidData(
            "error rates must lie in [0, 1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let attrs: Vec<AttrId> = spec
        .attributes
        .clone()
        .unwrap_or_else(|| clean.schema().attr_ids().collect());
    let mut dirty = clean.clone();
    if attrs.is_empty() {
        return Ok(dirty);
    }
    let domains: Vec<Vec<String>> = clean
        .schema()
        .attr_ids()
        .map(|a| clean.domain(a).into_keys().collect())
        .collect();
    let alphabets: Vec<Vec<char>> = domains
        .iter()
        .map(|d| {
            let mut cs: Vec<char> = d.iter().flat_map(|v| v.chars()).collect();
            cs.sort_unstable();
            cs.dedup();
            if cs.is_empty() {
                cs.push('x');
            }
            cs
        })
        .collect();
    let n_dirty = (clean.len() as f64 * spec.tuple_rate).round() as usize;
    let mut rows: Vec<usize> = (0..clean.len()).choose_multiple(&mut rng, n_dirty);
    rows.sort_unstable();
    let max_k = clean.schema().len().div_ceil(3);
    for row in rows {
        let k = rng.gen_range(1..=max_k.max(1)).min(attrs.len());
        for &a in attrs.choose_multiple(&mut rng, k).collect::<Vec<_>>() {
            let cur = clean.cell(row, a);
            let dom = &domains[a.0];
            let swap = dom.len() > 1 && !rng.gen_bool(spec.char_edit_prob);
            let new = if swap {
                let others: Vec<&String> = dom.iter().filter(|v| *v != cur).collect();
                (*others.choose(&mut rng).expect("domain has another value")).clone()
            } else {
                char_edit(cur, &alphabets[a.0], &mut rng)
            };
            dirty.set_cell(row, a, new);
        }
    }
    Ok(dirty)
}

/// Outcome of one simulated session. `curve` has `[user answers,
/// improvement]` points; `curve_by_dirty_fraction` divides the first
/// coordinate by the initial number of dirty tuples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub schema_version: u32,
    pub strategy: Strategy,
    pub seed: u64,
    pub config: SessionConfig,
    /// Set for strategies that apply updates without any feedback.
    pub heuristic: bool,
    pub tuples: usize,
    pub initial_dirty_tuples: usize,
    pub terminal_dirty_tuples: usize,
    pub labels: usize,
    pub model_decisions: usize,
    pub pending_left: usize,
    pub initial_violations: f64,
    pub terminal_violations: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub improvement: f64,
    pub curve: Vec<[f64; 2]>,
    pub curve_by_dirty_fraction: Vec<[f64; 2]>,
    pub quality: PrecisionRecall,
    pub events: Vec<SessionEvent>,
}

impl SessionReport {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn curve_points(&self) -> Vec<(f64, f64)> {
        self.curve.iter().map(|p| (p[0], p[1])).collect()
    }

    /// Area under the improvement curve up to `x_max` answers.
    pub fn auc(&self, x_max: f64) -> f64 {
        auc(&self.curve_points(), x_max)
    }
}

/// `feedback,improvement,strategy,seed` rows for every curve point.
pub fn curves_csv(reports: &[SessionReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feedback", "improvement", "strategy", "seed"])?;
    for r in reports {
        for p in &r.curve {
            w.write_record([
                p[0].to_string(),
                p[1].to_string(),
                r.strategy.to_string(),
                r.seed.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Area under a step curve of `(x, y)` points, held constant after the last
/// point up to `x_max`, divided by `x_max`.
pub fn auc(curve: &[(f64, f64)], x_max: f64) -> f64 {
    if curve.is_empty() || x_max <= 0.0 {
        return curve.last().map_or(0.0, |p| p.1);
    }
    let mut area = 0.0;
    for (i, &(x, y)) in curve.iter().enumerate() {
        if x >= x_max {
            break;
        }
        let next = curve.get(i + 1).map_or(x_max, |p| p.0.min(x_max));
        area += y * (next - x).max(0.0);
    }
    area / x_max
}

/// First x at which the curve reaches `level`.
pub fn labels_to_reach(curve: &[(f64, f64)], level: f64) -> Option<f64> {
    curve.iter().find(|p| p.1 >= level - 1e-12).map(|p| p.0)
}
