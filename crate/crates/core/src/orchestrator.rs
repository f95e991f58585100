//! Repair sessions: ranking, user interaction, learning and delegation.
//!
//! A [`Session`] owns the repair state, the learner and the event log. It is
//! driven either by a [`SimulatedUser`] that answers from a clean instance
//! ([`run_session`]) or step by step from outside (the HTTP service).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{AppliedChange, ChangeSet, Feedback, RepairState, Source};
use crate::error::{Error, Result};
use crate::evaluation::{improvement, precision_recall, QualityMeter, SessionReport};
use crate::generator::{CandidateUpdate, Scenario, UpdateId};
use crate::learner::{encode, order_by_uncertainty, Label, Learner, LearnerConfig, Prediction, TrainingExample};
use crate::model::{AttrId, Dataset, RuleSet, TupleId};
use crate::ranking::{
    compute_rule_weights, group_budget, group_updates, rank_pending, GroupKey, RuleScope, RuleWeights, UpdateGroup,
};

type Cell = (usize, AttrId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Ranked groups, uncertainty ordering, learning and delegation.
    Gdr,
    /// Ranked groups, every update checked by the user.
    GdrNoLearning,
    /// Ranked groups with learning, random order inside a group.
    GdrSLearning,
    /// No grouping: the most uncertain pending updates first.
    ActiveLearning,
    /// Largest group first.
    Greedy,
    /// Groups in random order.
    Random,
    /// Applies every update whose score reaches the threshold, without
    /// feedback.
    Auto,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Gdr,
        Strategy::GdrNoLearning,
        Strategy::GdrSLearning,
        Strategy::ActiveLearning,
        Strategy::Greedy,
        Strategy::Random,
        Strategy::Auto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Gdr => "gdr",
            Strategy::GdrNoLearning => "gdr-no-learning",
            Strategy::GdrSLearning => "gdr-s-learning",
            Strategy::ActiveLearning => "active-learning",
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
            Strategy::Auto => "auto",
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, Strategy::Gdr | Strategy::GdrSLearning | Strategy::ActiveLearning)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Strategy::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Strategy::ALL.iter().map(|x| x.name()).collect();
            format!("unknown strategy `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: Strategy,
    /// Maximum number of user answers; unlimited when `None`.
    pub budget: Option<usize>,
    pub batch_size: usize,
    pub seed: u64,
    /// Score threshold of the `auto` strategy.
    pub threshold: f64,
    /// Rejections of one cell after which the simulated user types the
    /// correct value, and the cap on model rejections per cell.
    pub k_reveal: usize,
    pub scope: RuleScope,
    pub learner: LearnerConfig,
    /// Passes of model decisions over the remaining updates once the user
    /// budget is spent.
    pub model_passes: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            strategy: Strategy::Gdr,
            budget: None,
            batch_size: 5,
            seed: 0,
            threshold: 0.8,
            k_reveal: 3,
            scope: RuleScope::Normalized,
            learner: LearnerConfig::default(),
            model_passes: 10,
        }
    }
}

/// Answers from a clean instance: confirm a correct value, retain a correct
/// cell, otherwise reject; after `k_reveal − 1` rejections of one cell the
/// next wrong suggestion is replaced with the correct value.
#[derive(Debug, Clone)]
pub struct SimulatedUser {
    truth: Dataset,
    k_reveal: usize,
    rejections: HashMap<Cell, usize>,
}

impl SimulatedUser {
    pub fn new(truth: Dataset, k_reveal: usize) -> Self {
        SimulatedUser {
            truth,
            k_reveal,
            rejections: HashMap::new(),
        }
    }

    pub fn truth(&self) -> &Dataset {
        &self.truth
    }

    pub fn answer(&mut self, u: &CandidateUpdate, current: &str) -> Feedback {
        let t = self.truth.cell(u.row, u.attr);
        if u.value == t {
            return Feedback::Confirm;
        }
        if current == t {
            return Feedback::Retain;
        }
        let seen = self.rejections.entry((u.row, u.attr)).or_insert(0);
        if *seen + 1 >= self.k_reveal && !t.is_empty() {
            Feedback::Replace(t.to_string())
        } else {
            *seen += 1;
            Feedback::Reject
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateView {
    pub id: UpdateId,
    pub tuple: TupleId,
    pub attribute: String,
    pub value: String,
    pub current: String,
    pub score: f64,
    pub scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionEvent {
    pub index: usize,
    pub update: UpdateView,
    pub source: Source,
    pub feedback: Feedback,
    /// User answers so far, including this one.
    pub labels: usize,
    pub applied: usize,
    pub violations: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupView {
    pub id: String,
    pub attribute: String,
    pub value: String,
    pub size: usize,
    pub gain: f64,
    /// Updates to check before the model may decide the rest.
    pub budget: usize,
    pub model_trained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub strategy: Strategy,
    pub tuples: usize,
    pub rules: usize,
    pub dirty_tuples: usize,
    pub initial_dirty_tuples: usize,
    pub pending: usize,
    pub labels: usize,
    pub model_decisions: usize,
    pub violations: f64,
    pub events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement: Option<f64>,
}

/// A cell write as shown to clients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeView {
    pub tuple: TupleId,
    pub attribute: String,
    pub old: String,
    pub new: String,
    pub source: Source,
}

/// What one request did to the session.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DeltaView {
    pub applied: Vec<ChangeView>,
    pub discarded: Vec<UpdateView>,
    pub created: Vec<UpdateView>,
    /// Event count after the request, usable as the next `since` cursor.
    pub events: usize,
    /// Answers given in the attribute's current batch of `batch_size`.
    pub batch: usize,
}

#[derive(Debug, Clone)]
pub struct Session {
    cfg: SessionConfig,
    state: RepairState,
    initial: Dataset,
    learner: Learner,
    meter: Option<QualityMeter>,
    initial_loss: f64,
    initial_violations: f64,
    initial_dirty: usize,
    events: Vec<SessionEvent>,
    changes: Vec<AppliedChange>,
    curve: Vec<(f64, f64)>,
    labels: usize,
    model_decisions: usize,
    rng: ChaCha8Rng,
    model_rejections: HashMap<Cell, usize>,
    g_max: f64,
    selected: Option<GroupKey>,
    live_answers: Vec<usize>,
}

impl Session {
    /// Detects violations and generates the initial updates. With a clean
    /// instance the session also tracks quality loss.
    pub fn new(data: Dataset, rules: Arc<RuleSet>, truth: Option<&Dataset>, cfg: SessionConfig) -> Result<Self> {
        if let Some(t) = truth {
            data.check_aligned(t)?;
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let meter = truth.map(|t| QualityMeter::new(t, &rules));
        let initial = data.clone();
        let mut state = RepairState::new(data, rules);
        state.generate_all();
        let initial_loss = meter.as_ref().map_or(0.0, |m| m.loss(state.index()));
        let learner_cfg = LearnerConfig {
            seed: cfg.seed,
            ..cfg.learner
        };
        let width = state.data().schema().len();
        let mut s = Session {
            learner: Learner::new(state.data().schema(), learner_cfg),
            initial_violations: state.total_violations(),
            initial_dirty: state.dirty().len(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            state,
            initial,
            meter,
            initial_loss,
            events: Vec::new(),
            changes: Vec::new(),
            curve: Vec::new(),
            labels: 0,
            model_decisions: 0,
            model_rejections: HashMap::new(),
            g_max: 0.0,
            selected: None,
            live_answers: vec![0; width],
        };
        s.push_curve();
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RepairState {
        &self.state
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn initial_data(&self) -> &Dataset {
        &self.initial
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn events_since(&self, cursor: usize) -> &[SessionEvent] {
        &self.events[cursor.min(self.events.len())..]
    }

    pub fn changes(&self) -> &[AppliedChange] {
        &self.changes
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn model_decisions(&self) -> usize {
        self.model_decisions
    }

    pub fn initial_dirty(&self) -> usize {
        self.initial_dirty
    }

    pub fn curve(&self) -> &[(f64, f64)] {
        &self.curve
    }

    /// Current loss and improvement, when a clean instance is known.
    pub fn quality(&self) -> Option<(f64, f64)> {
        let m = self.meter.as_ref()?;
        let loss = m.loss(self.state.index());
        Some((loss, improvement(self.initial_loss, loss)))
    }

    pub fn initial_loss(&self) -> f64 {
        self.initial_loss
    }

    pub fn initial_violations(&self) -> f64 {
        self.initial_violations
    }

    fn budget_left(&self) -> usize {
        self.cfg.budget.map_or(usize::MAX, |b| b.saturating_sub(self.labels))
    }

    fn push_curve(&mut self) {
        if let Some((_, imp)) = self.quality() {
            let x = self.labels as f64;
            match self.curve.last_mut() {
                Some(last) if last.0 == x => last.1 = imp,
                _ => self.curve.push((x, imp)),
            }
        }
    }

    pub fn prediction(&self, u: &CandidateUpdate) -> Option<Prediction> {
        self.learner
            .predict(u, &self.state.data().tuple(u.row).cells, self.state.similarity())
    }

    /// Confirm probability used in the gain: the model's when the strategy
    /// learns and the attribute's model is trained, the update's score
    /// otherwise.
    fn p_confirm(&self, u: &CandidateUpdate) -> f64 {
        if self.cfg.strategy.learns() {
            self.learner
                .confirm_probability(u, &self.state.data().tuple(u.row).cells, self.state.similarity())
        } else {
            u.score
        }
    }

    fn order_uncertainty(&self, u: &CandidateUpdate) -> f64 {
        self.learner
            .ordering_uncertainty(u, &self.state.data().tuple(u.row).cells, self.state.similarity())
    }

    pub fn view(&self, u: &CandidateUpdate) -> UpdateView {
        let prediction = self.prediction(u);
        UpdateView {
            id: u.id,
            tuple: self.state.data().tuple(u.row).id.clone(),
            attribute: self.state.data().schema().name(u.attr).to_string(),
            value: u.value.clone(),
            current: u.current.clone(),
            score: u.score,
            scenario: u.scenario,
            uncertainty: prediction.as_ref().map_or(1.0 - u.score, |p| p.uncertainty),
            prediction,
        }
    }

    pub fn weights(&self) -> Result<RuleWeights> {
        compute_rule_weights(&self.state, self.cfg.scope)
    }

    /// Groups in the order the session's strategy visits them.
    pub fn rank(&mut self) -> Result<Vec<UpdateGroup>> {
        let groups = match self.cfg.strategy {
            Strategy::Greedy => {
                let mut g = group_updates(self.state.pending());
                g.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.key.cmp(&b.key)));
                g
            }
            Strategy::Random => {
                let mut g = group_updates(self.state.pending());
                g.shuffle(&mut self.rng);
                g
            }
            _ => {
                let w = self.weights()?;
                let this = &*self;
                rank_pending(&self.state, &w, |u| this.p_confirm(u))
            }
        };
        self.g_max = groups.iter().map(|g| g.gain).fold(0.0, f64::max);
        Ok(groups)
    }

    fn budget_for(&self, g: &UpdateGroup) -> usize {
        group_budget(g.gain, self.g_max, self.initial_dirty, g.len())
    }

    fn group_view(&self, g: &UpdateGroup) -> GroupView {
        GroupView {
            id: g.key.id(),
            attribute: self.state.data().schema().name(g.key.attr).to_string(),
            value: g.key.value.clone(),
            size: g.len(),
            gain: g.gain,
            budget: self.budget_for(g),
            model_trained: self.learner.is_trained(g.key.attr),
        }
    }

    /// Ranked groups by expected gain, for display.
    pub fn groups(&mut self) -> Result<Vec<GroupView>> {
        let w = self.weights()?;
        let this = &*self;
        let ranked = rank_pending(&self.state, &w, |u| {
            this.learner
                .confirm_probability(u, &this.state.data().tuple(u.row).cells, this.state.similarity())
        });
        self.g_max = ranked.iter().map(|g| g.gain).fold(0.0, f64::max);
        Ok(ranked.iter().map(|g| self.group_view(g)).collect())
    }

    fn members(&self, key: &GroupKey) -> Vec<UpdateId> {
        let mut ids: Vec<UpdateId> = self
            .state
            .pending()
            .filter(|u| u.attr == key.attr && u.value == key.value)
            .map(|u| u.id)
            .collect();
        ids.sort();
        ids
    }

    fn lookup_group(&self, group_id: &str) -> Result<(GroupKey, Vec<UpdateId>)> {
        let key = GroupKey::parse_id(group_id).ok_or_else(|| Error::UnknownGroup(group_id.to_string()))?;
        let members = self.members(&key);
        if members.is_empty() {
            return Err(Error::UnknownGroup(group_id.to_string()));
        }
        Ok((key, members))
    }

    pub fn select(&mut self, group_id: &str) -> Result<GroupView> {
        let (key, _) = self.lookup_group(group_id)?;
        let view = self
            .groups()?
            .into_iter()
            .find(|g| g.id == group_id)
            .ok_or_else(|| Error::UnknownGroup(group_id.to_string()))?;
        self.selected = Some(key);
        Ok(view)
    }

    /// Members of a group, most uncertain first, with the model's
    /// predictions when available.
    pub fn group_updates(&self, group_id: &str) -> Result<Vec<UpdateView>> {
        let (_, members) = self.lookup_group(group_id)?;
        Ok(self
            .ordered(&members, Strategy::Gdr)
            .into_iter()
            .filter_map(|id| self.state.get(id).map(|u| self.view(u)))
            .collect())
    }

    pub fn summary(&self) -> SessionSummary {
        let q = self.quality();
        SessionSummary {
            strategy: self.cfg.strategy,
            tuples: self.state.data().len(),
            rules: self.state.rules().len(),
            dirty_tuples: self.state.dirty().len(),
            initial_dirty_tuples: self.initial_dirty,
            pending: self.state.pending_len(),
            labels: self.labels,
            model_decisions: self.model_decisions,
            violations: self.state.total_violations(),
            events: self.events.len(),
            selected_group: self.selected.as_ref().map(GroupKey::id),
            loss: q.map(|x| x.0),
            improvement: q.map(|x| x.1),
        }
    }

    fn record(&mut self, view: UpdateView, feedback: Feedback, source: Source, cs: &ChangeSet) {
        self.changes.extend(cs.applied.iter().cloned());
        if source == Source::User {
            self.labels += 1;
        } else if source == Source::Model {
            self.model_decisions += 1;
        }
        self.push_curve();
        let q = self.quality();
        self.events.push(SessionEvent {
            index: self.events.len(),
            update: view,
            source,
            feedback,
            labels: self.labels,
            applied: cs.applied.len(),
            violations: self.state.total_violations(),
            loss: q.map(|x| x.0),
            improvement: q.map(|x| x.1),
        });
    }

    /// Applies a user answer and stores it as training data; call
    /// [`Session::retrain`] to refresh the attribute's model.
    pub fn user_feedback(&mut self, id: UpdateId, feedback: Feedback) -> Result<ChangeSet> {
        let u = self
            .state
            .get(id)
            .cloned()
            .ok_or_else(|| Error::StaleUpdate(id.to_string()))?;
        let view = self.view(&u);
        let cells = self.state.data().tuple(u.row).cells.clone();
        let cs = self.state.apply_feedback(id, feedback.clone(), Source::User)?;
        let sim = self.state.similarity();
        let mut examples = vec![TrainingExample {
            features: encode(&cells, u.attr, &u.value, sim),
            label: Label::of(&feedback),
        }];
        if let Feedback::Replace(v) = &feedback {
            examples.push(TrainingExample {
                features: encode(&cells, u.attr, v, sim),
                label: Label::Confirm,
            });
        }
        self.learner.add(u.attr, examples);
        self.record(view, feedback, Source::User, &cs);
        Ok(cs)
    }

    /// Applies an answer from a live client and retrains the attribute's
    /// model on everything answered so far.
    pub fn live_feedback(&mut self, id: UpdateId, feedback: Feedback) -> Result<DeltaView> {
        let cs = self.user_feedback(id, feedback)?;
        self.retrain(id.attr);
        self.live_answers[id.attr.0] += 1;
        let mut d = self.delta(std::slice::from_ref(&cs));
        d.batch = self.live_answers[id.attr.0] % self.cfg.batch_size.max(1);
        Ok(d)
    }

    /// [`Session::delegate`] as a delta.
    pub fn live_delegate(&mut self, group_id: &str) -> Result<DeltaView> {
        let sets = self.delegate(group_id)?;
        Ok(self.delta(&sets))
    }

    /// Merges change sets into a client view. Updates created and dropped
    /// within the same sets are left out.
    pub fn delta(&self, sets: &[ChangeSet]) -> DeltaView {
        let schema = self.state.data().schema();
        let created: HashSet<UpdateId> = sets.iter().flat_map(|c| c.created.iter().map(|u| u.id)).collect();
        DeltaView {
            applied: sets
                .iter()
                .flat_map(|c| &c.applied)
                .map(|c| ChangeView {
                    tuple: self.state.data().tuple(c.row).id.clone(),
                    attribute: schema.name(c.attr).to_string(),
                    old: c.old.clone(),
                    new: c.new.clone(),
                    source: c.source,
                })
                .collect(),
            discarded: sets
                .iter()
                .flat_map(|c| &c.discarded)
                .filter(|u| !created.contains(&u.id))
                .map(|u| self.view(u))
                .collect(),
            created: sets
                .iter()
                .flat_map(|c| &c.created)
                .filter_map(|u| self.state.get(u.id))
                .map(|u| self.view(u))
                .collect(),
            events: self.events.len(),
            batch: 0,
        }
    }

    pub fn retrain(&mut self, attr: AttrId) {
        self.learner.retrain(attr);
    }

    /// Lets the attribute's model decide one update. Returns `None` when the
    /// model is untrained or has already rejected this cell `k_reveal` times.
    pub fn model_decide(&mut self, id: UpdateId) -> Result<Option<ChangeSet>> {
        let u = self
            .state
            .get(id)
            .cloned()
            .ok_or_else(|| Error::StaleUpdate(id.to_string()))?;
        let Some(p) = self.prediction(&u) else {
            return Ok(None);
        };
        let cell = (u.row, u.attr);
        if p.label == Label::Reject && self.model_rejections.get(&cell).copied().unwrap_or(0) >= self.cfg.k_reveal {
            return Ok(None);
        }
        if p.label == Label::Reject {
            *self.model_rejections.entry(cell).or_insert(0) += 1;
        }
        let view = self.view(&u);
        let fb = p.label.feedback();
        let cs = self.state.apply_feedback(id, fb.clone(), Source::Model)?;
        self.record(view, fb, Source::Model, &cs);
        Ok(Some(cs))
    }

    /// The model decides every member of a group in one pass. Fails when
    /// the group's attribute has no trained model.
    pub fn delegate(&mut self, group_id: &str) -> Result<Vec<ChangeSet>> {
        let (key, members) = self.lookup_group(group_id)?;
        if !self.learner.is_trained(key.attr) {
            return Err(Error::UntrainedModel(
                self.state.data().schema().name(key.attr).to_string(),
            ));
        }
        self.delegate_members(&members)
    }

    fn delegate_members(&mut self, members: &[UpdateId]) -> Result<Vec<ChangeSet>> {
        let mut out = Vec::new();
        for &id in members {
            if self.state.get(id).is_none() {
                continue;
            }
            if let Some(cs) = self.model_decide(id)? {
                out.push(cs);
            }
        }
        Ok(out)
    }

    /// Orders update ids for presentation: by uncertainty for `gdr`, in a
    /// seeded random order for `gdr-s-learning`, by id otherwise.
    fn ordered(&self, ids: &[UpdateId], strategy: Strategy) -> Vec<UpdateId> {
        match strategy {
            Strategy::Gdr | Strategy::ActiveLearning => {
                let mut keyed: Vec<((TupleId, UpdateId), f64)> = ids
                    .iter()
                    .filter_map(|&id| self.state.get(id))
                    .map(|u| {
                        (
                            (self.state.data().tuple(u.row).id.clone(), u.id),
                            self.order_uncertainty(u),
                        )
                    })
                    .collect();
                order_by_uncertainty(&mut keyed);
                keyed.into_iter().map(|((_, id), _)| id).collect()
            }
            _ => ids.to_vec(),
        }
    }

    /// One simulated answer, plus the follow-up value when a rejection
    /// leaves the cell wrong with nothing left to suggest.
    fn ask(&mut self, user: &mut SimulatedUser, id: UpdateId) -> Result<Option<Label>> {
        if self.budget_left() == 0 {
            return Ok(None);
        }
        let Some(u) = self.state.get(id).cloned() else {
            return Ok(None);
        };
        let current = self.state.data().cell(u.row, u.attr).to_string();
        let fb = user.answer(&u, &current);
        let label = Label::of(&fb);
        let rejected = fb == Feedback::Reject;
        self.user_feedback(id, fb)?;
        let truth = user.truth().cell(u.row, u.attr);
        if rejected
            && self.budget_left() > 0
            && self.state.pending_for(u.row, u.attr).is_none()
            && self.state.cells().changeable(u.row, u.attr)
            && self.state.data().cell(u.row, u.attr) != truth
            && !truth.is_empty()
        {
            if let Ok(p) = self.state.propose(u.row, u.attr, truth) {
                self.user_feedback(p.id, Feedback::Confirm)?;
            }
        }
        Ok(Some(label))
    }

    /// Works through one group: batches of the most informative updates go
    /// to the user until the group is empty, the budget is spent, or at
    /// least `d` answers were given and the model predicted a whole batch of
    /// this group correctly, at which point the model decides the rest.
    fn interactive_round(&mut self, user: &mut SimulatedUser, group: &UpdateGroup, d: usize) -> Result<()> {
        let attr = group.key.attr;
        let strategy = self.cfg.strategy;
        let learns = strategy.learns();
        let mut answered = 0;
        let mut satisfied = false;
        loop {
            let live: Vec<UpdateId> = group
                .members
                .iter()
                .copied()
                .filter(|&id| self.state.get(id).is_some())
                .collect();
            if live.is_empty() || self.budget_left() == 0 {
                return Ok(());
            }
            if learns && answered >= d && satisfied && self.learner.is_trained(attr) {
                self.delegate_members(&live)?;
                return Ok(());
            }
            let mut order = self.ordered(&live, strategy);
            if strategy == Strategy::GdrSLearning {
                order.shuffle(&mut self.rng);
            }
            order.truncate(self.cfg.batch_size.max(1).min(self.budget_left()));
            let trained_before = self.learner.is_trained(attr);
            let mut all_correct = true;
            for id in order {
                let predicted = self.state.get(id).and_then(|u| self.prediction(u)).map(|p| p.label);
                if let Some(label) = self.ask(user, id)? {
                    answered += 1;
                    if predicted != Some(label) {
                        all_correct = false;
                    }
                }
            }
            if learns {
                self.retrain(attr);
                satisfied = trained_before && all_correct;
            }
        }
    }

    /// Model decisions over everything still pending, group by group in
    /// ranked order, until a pass decides nothing.
    pub fn finish_with_model(&mut self) -> Result<()> {
        for _ in 0..self.cfg.model_passes {
            let groups = self.rank()?;
            let mut progress = false;
            for g in groups {
                if !self.learner.is_trained(g.key.attr) {
                    continue;
                }
                progress |= !self.delegate_members(&g.members)?.is_empty();
            }
            if !progress {
                break;
            }
        }
        Ok(())
    }

    fn run_grouped(&mut self, user: &mut SimulatedUser) -> Result<()> {
        while self.state.pending_len() > 0 && self.budget_left() > 0 {
            let groups = self.rank()?;
            let Some(top) = groups.into_iter().next() else { break };
            let d = self.budget_for(&top);
            let before = (self.labels, self.model_decisions);
            self.interactive_round(user, &top, d)?;
            if (self.labels, self.model_decisions) == before {
                break;
            }
        }
        if self.cfg.strategy.learns() && self.state.pending_len() > 0 {
            self.finish_with_model()?;
        }
        Ok(())
    }

    /// Quality the model alone would reach from here, without changing the
    /// session.
    fn projected_improvement(&self) -> Result<f64> {
        let mut scratch = self.clone();
        scratch.finish_with_model()?;
        Ok(scratch.quality().map_or(0.0, |q| q.1))
    }

    fn run_active_learning(&mut self, user: &mut SimulatedUser) -> Result<()> {
        let stride = self
            .cfg
            .batch_size
            .max(self.cfg.budget.map_or(self.initial_dirty, |b| b) / 20)
            .max(1);
        let mut projected = vec![(0.0, self.quality().map_or(0.0, |q| q.1))];
        let mut last = 0;
        while self.state.pending_len() > 0 && self.budget_left() > 0 {
            let ids: Vec<UpdateId> = self.state.pending().map(|u| u.id).collect();
            let mut order = self.ordered(&ids, Strategy::ActiveLearning);
            order.truncate(self.cfg.batch_size.max(1).min(self.budget_left()));
            let mut touched: Vec<AttrId> = Vec::new();
            for id in order {
                if let Some(u) = self.state.get(id) {
                    touched.push(u.attr);
                }
                self.ask(user, id)?;
            }
            touched.sort();
            touched.dedup();
            for a in touched {
                self.retrain(a);
            }
            if self.labels - last >= stride {
                last = self.labels;
                projected.push((self.labels as f64, self.projected_improvement()?));
            }
        }
        self.finish_with_model()?;
        let fin = self.quality().map_or(0.0, |q| q.1);
        match projected.last_mut() {
            Some(p) if p.0 == self.labels as f64 => p.1 = fin,
            _ => projected.push((self.labels as f64, fin)),
        }
        self.curve = projected;
        Ok(())
    }

    /// Confirms every pending update scoring at least the threshold, in one
    /// pass and without a user.
    pub fn auto_repair(&mut self) -> Result<()> {
        let ids: Vec<UpdateId> = self.state.pending().map(|u| u.id).collect();
        for id in ids {
            let Some(u) = self.state.get(id).cloned() else { continue };
            if u.score < self.cfg.threshold {
                continue;
            }
            let view = self.view(&u);
            let cs = self.state.apply_feedback(id, Feedback::Confirm, Source::System)?;
            self.record(view, Feedback::Confirm, Source::System, &cs);
        }
        Ok(())
    }

    /// Runs the configured strategy to completion against a simulated user.
    pub fn simulate(&mut self, user: &mut SimulatedUser) -> Result<()> {
        match self.cfg.strategy {
            Strategy::Auto => self.auto_repair(),
            Strategy::ActiveLearning => self.run_active_learning(user),
            _ => self.run_grouped(user),
        }
    }

    pub fn report(&self, truth: &Dataset) -> SessionReport {
        let q = self.quality();
        let e = self.initial_dirty.max(1) as f64;
        SessionReport {
            schema_version: SessionReport::SCHEMA_VERSION,
            strategy: self.cfg.strategy,
            seed: self.cfg.seed,
            config: self.cfg.clone(),
            heuristic: self.cfg.strategy == Strategy::Auto,
            tuples: self.state.data().len(),
            initial_dirty_tuples: self.initial_dirty,
            terminal_dirty_tuples: self.state.dirty().len(),
            labels: self.labels,
            model_decisions: self.model_decisions,
            pending_left: self.state.pending_len(),
            initial_violations: self.initial_violations,
            terminal_violations: self.state.total_violations(),
            initial_loss: self.initial_loss,
            final_loss: q.map_or(0.0, |x| x.0),
            improvement: q.map_or(0.0, |x| x.1),
            curve: self.curve.iter().map(|&(x, y)| [x, y]).collect(),
            curve_by_dirty_fraction: self.curve.iter().map(|&(x, y)| [x / e, y]).collect(),
            quality: precision_recall(&self.changes, &self.initial, truth),
            events: self.events.clone(),
        }
    }
}

/// Runs one strategy against a simulated user that knows `truth`.
pub fn run_session(dirty: Dataset, rules: Arc<RuleSet>, truth: &Dataset, cfg: SessionConfig) -> Result<SessionReport> {
    let mut s = Session::new(dirty, rules, Some(truth), cfg.clone())?;
    let mut user = SimulatedUser::new(truth.clone(), cfg.k_reveal);
    s.simulate(&mut user)?;
    Ok(s.report(truth))
}

/// Every `(instance, strategy)` pair in parallel; each instance is a seed
/// with its dirty data. Reports come back in instance-major order.
pub fn run_strategy_baselines(
    instances: &[(u64, Dataset)],
    rules: &Arc<RuleSet>,
    truth: &Dataset,
    strategies: &[Strategy],
    base: &SessionConfig,
) -> Result<Vec<SessionReport>> {
    let jobs: Vec<(u64, &Dataset, Strategy)> = instances
        .iter()
        .flat_map(|(seed, d)| strategies.iter().map(move |&s| (*seed, d, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(seed, d, strategy)| {
            let cfg = SessionConfig {
                strategy,
                seed,
                ..base.clone()
            };
            run_session(d.clone(), Arc::clone(rules), truth, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>(), Ok(s));
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("best".parse::<Strategy>().is_err());
    }

    #[test]
    fn simulated_user_reveals_after_rejections() {
        let (d, rules) = fixtures::figure1();
        let truth = fixtures::figure1_truth();
        let mut state = RepairState::new(d, rules);
        let mut user = SimulatedUser::new(truth, 3);
        let wrong = state.propose(4, AttrId(3), "Gary").unwrap();
        assert_eq!(user.answer(&wrong, "Fort Wayne"), Feedback::Retain);
        let zip = state.propose(4, AttrId(5), "46999").unwrap();
        assert_eq!(user.answer(&zip, "46391"), Feedback::Reject);
        assert_eq!(user.answer(&zip, "46391"), Feedback::Reject);
        assert_eq!(user.answer(&zip, "46391"), Feedback::Replace("46825".into()));
    }

    #[test]
    fn figure1_sessions_repair_everything() {
        let (d, rules) = fixtures::figure1();
        let truth = fixtures::figure1_truth();
        for strategy in [
            Strategy::Gdr,
            Strategy::GdrNoLearning,
            Strategy::Greedy,
            Strategy::Random,
        ] {
            let cfg = SessionConfig {
                strategy,
                ..SessionConfig::default()
            };
            let r = run_session(d.clone(), Arc::clone(&rules), &truth, cfg).unwrap();
            assert_eq!(r.terminal_violations, 0.0, "{strategy}");
            assert_eq!(r.improvement, 1.0, "{strategy}");
            assert_eq!(r.quality.precision, 1.0, "{strategy}");
        }
    }

    #[test]
    fn budget_caps_user_answers() {
        let (d, rules) = fixtures::figure1();
        let truth = fixtures::figure1_truth();
        let cfg = SessionConfig {
            budget: Some(2),
            strategy: Strategy::GdrNoLearning,
            ..SessionConfig::default()
        };
        let r = run_session(d, rules, &truth, cfg).unwrap();
        assert_eq!(r.labels, 2);
        assert!(r.curve.windows(2).all(|w| w[0][0] <= w[1][0]));
    }
}
