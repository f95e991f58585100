//! Per-attribute committees that predict feedback on candidate updates.
//!
//! A candidate `⟨t, B, v⟩` is encoded as the tuple's cell values in schema
//! order, then `v`, then `sim(t[B], v)`. Each attribute gets its own random
//! forest trained on the feedback collected for that attribute. Vote
//! fractions give the prediction, the probability of a confirm, and a
//! base-3 entropy used to pick the most informative updates to show first.

mod forest;
mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{default_m_try, Forest};
pub use tree::{Node, Test};

use crate::consistency::Feedback;
use crate::error::{Error, Result};
use crate::generator::CandidateUpdate;
use crate::model::{AttrId, Schema};
use crate::similarity::Similarity;

/// Feedback classes, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Confirm = 0,
    Reject = 1,
    Retain = 2,
}

pub const LABELS: [Label; 3] = [Label::Confirm, Label::Reject, Label::Retain];

impl Label {
    /// Training label for a feedback on the suggested value. A replace is a
    /// reject of the suggestion.
    pub fn of(feedback: &Feedback) -> Label {
        match feedback {
            Feedback::Confirm => Label::Confirm,
            Feedback::Reject | Feedback::Replace(_) => Label::Reject,
            Feedback::Retain => Label::Retain,
        }
    }

    pub fn feedback(self) -> Feedback {
        match self {
            Label::Confirm => Feedback::Confirm,
            Label::Reject => Feedback::Reject,
            Label::Retain => Feedback::Retain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feature {
    Cat(String),
    Num(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: Vec<Feature>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Label,
    /// Vote fractions for confirm, reject, retain.
    pub fractions: [f64; 3],
    pub confirm_prob: f64,
    pub uncertainty: f64,
}

/// `−Σ f log₃ f` over the non-zero fractions.
pub fn uncertainty(fractions: &[f64]) -> f64 {
    let h: f64 = fractions.iter().filter(|&&f| f > 0.0).map(|&f| -f * f.log(3.0)).sum();
    h.clamp(0.0, 1.0)
}

/// Feature layout: `cells[0..n]`, suggested value, `sim(cells[attr], value)`.
pub fn encode(cells: &[String], attr: AttrId, value: &str, sim: &dyn Similarity) -> Vec<Feature> {
    let mut f: Vec<Feature> = cells.iter().map(|c| Feature::Cat(c.clone())).collect();
    f.push(Feature::Cat(value.to_string()));
    f.push(Feature::Num(sim.similarity(&cells[attr.0], value)));
    f
}

pub fn encode_example(u: &CandidateUpdate, cells: &[String], label: Label, sim: &dyn Similarity) -> TrainingExample {
    TrainingExample {
        features: encode(cells, u.attr, &u.value, sim),
        label,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub trees: usize,
    pub min_examples: usize,
    pub min_labels: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            trees: 10,
            min_examples: 10,
            min_labels: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeModel {
    pub attr: AttrId,
    pub examples: Vec<TrainingExample>,
    pub forest: Option<Forest>,
}

impl AttributeModel {
    pub fn new(attr: AttrId) -> Self {
        AttributeModel {
            attr,
            examples: Vec::new(),
            forest: None,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.forest.is_some()
    }

    fn ready(&self, cfg: &LearnerConfig) -> bool {
        let mut seen = [false; 3];
        for e in &self.examples {
            seen[e.label as usize] = true;
        }
        self.examples.len() >= cfg.min_examples && seen.iter().filter(|&&s| s).count() >= cfg.min_labels
    }

    /// Rebuilds the forest from all examples, or leaves it untrained while
    /// the training set is below the threshold.
    pub fn retrain(&mut self, cfg: &LearnerConfig) {
        if !self.ready(cfg) {
            self.forest = None;
            return;
        }
        let xs: Vec<Vec<Feature>> = self.examples.iter().map(|e| e.features.clone()).collect();
        let ys: Vec<Label> = self.examples.iter().map(|e| e.label).collect();
        let seed = cfg.seed ^ ((self.attr.0 as u64) << 32);
        self.forest = Some(Forest::train(&xs, &ys, cfg.trees, seed));
    }

    pub fn predict(&self, features: &[Feature]) -> Option<Prediction> {
        self.forest.as_ref().map(|f| f.predict(features))
    }
}

/// One model per schema attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub version: u32,
    pub config: LearnerConfig,
    pub models: Vec<AttributeModel>,
}

impl Learner {
    pub fn new(schema: &Schema, config: LearnerConfig) -> Self {
        Learner {
            version: 1,
            config,
            models: schema.attr_ids().map(AttributeModel::new).collect(),
        }
    }

    pub fn model(&self, attr: AttrId) -> &AttributeModel {
        &self.models[attr.0]
    }

    pub fn is_trained(&self, attr: AttrId) -> bool {
        self.models[attr.0].is_trained()
    }

    pub fn add(&mut self, attr: AttrId, examples: impl IntoIterator<Item = TrainingExample>) {
        self.models[attr.0].examples.extend(examples);
    }

    pub fn retrain(&mut self, attr: AttrId) {
        let cfg = self.config;
        self.models[attr.0].retrain(&cfg);
    }

    pub fn predict(&self, u: &CandidateUpdate, cells: &[String], sim: &dyn Similarity) -> Option<Prediction> {
        self.models[u.attr.0].predict(&encode(cells, u.attr, &u.value, sim))
    }

    pub fn predict_trained(&self, u: &CandidateUpdate, cells: &[String], sim: &dyn Similarity) -> Result<Prediction> {
        self.predict(u, cells, sim)
            .ok_or_else(|| Error::UntrainedModel(format!("#{}", u.attr.0)))
    }

    /// Fraction of trees voting confirm, or the update's score while the
    /// attribute's model is untrained.
    pub fn confirm_probability(&self, u: &CandidateUpdate, cells: &[String], sim: &dyn Similarity) -> f64 {
        self.predict(u, cells, sim).map_or(u.score, |p| p.confirm_prob)
    }

    /// Uncertainty used for ordering; `1 − score` while untrained.
    pub fn ordering_uncertainty(&self, u: &CandidateUpdate, cells: &[String], sim: &dyn Similarity) -> f64 {
        self.predict(u, cells, sim).map_or(1.0 - u.score, |p| p.uncertainty)
    }
}

/// Sorts `(key, uncertainty)` pairs by descending uncertainty, ties by key.
pub fn order_by_uncertainty<K: Ord>(items: &mut [(K, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_base_three() {
        assert_eq!(uncertainty(&[1.0, 0.0, 0.0]), 0.0);
        assert!((uncertainty(&[1.0 / 3.0; 3]) - 1.0).abs() < 1e-12);
        let r1 = uncertainty(&[0.6, 0.2, 0.2]);
        let r2 = uncertainty(&[0.2, 0.8, 0.0]);
        assert!((r1 - 0.8650).abs() < 1e-3);
        assert!((r2 - 0.4555).abs() < 1e-3);
        assert!(r1 > r2);
    }

    #[test]
    fn votes_to_prediction() {
        let p = Prediction::from_votes([3, 1, 1]);
        assert_eq!(p.label, Label::Confirm);
        assert!((p.confirm_prob - 0.6).abs() < 1e-12);
        assert_eq!(Prediction::from_votes([1, 4, 0]).label, Label::Reject);
        assert_eq!(Prediction::from_votes([0, 0, 5]).uncertainty, 0.0);
    }

    #[test]
    fn ordering_breaks_ties_by_key() {
        let mut v = vec![("t3", 0.2), ("t1", 0.86), ("t2", 0.2), ("t0", 0.45)];
        order_by_uncertainty(&mut v);
        let keys: Vec<&str> = v.iter().map(|x| x.0).collect();
        assert_eq!(keys, ["t1", "t0", "t2", "t3"]);
    }
}
