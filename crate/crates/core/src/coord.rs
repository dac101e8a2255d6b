//! The framework's top-level loop: one round per observation.
//!
//! Each round stores the observation, detects the situation, and either falls back to the
//! user-defined rules (noise or component failure) or, once the waiting time has elapsed,
//! optimizes the active strategy's parameters or runs strategy selection first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::ddm::DomainDataModel;
use crate::paramopt::{ParameterOptimizer, ParamoptError, SurrogateKey};
use crate::rules::{apply_fallback, FallbackRuleSet, RuleError};
use crate::sitdet::{SitdetError, SituationDetector};
use crate::store::{Filter, Observation, ObservationStore, StoreError};
use crate::stratsel::{select_explained, SelectionContext, StratselError};
use crate::value::{AdaptationDecision, DataType, ParameterSetting, Value, ValueMap};
use crate::SituationId;

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Detection(#[from] SitdetError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A component failure inside a round; the round degrades to the fallback rules.
#[derive(Debug, Error)]
enum RoundError {
    #[error("situation detection: {0}")]
    Detection(#[from] SitdetError),
    #[error("strategy selection: {0}")]
    Selection(#[from] StratselError),
    #[error("parameter optimization: {0}")]
    Optimization(#[from] ParamoptError),
}

enum Step {
    Decided(AdaptationDecision),
    Wait,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionSource {
    Fallback,
    Selection,
    Optimization,
}

impl DecisionSource {
    pub fn name(self) -> &'static str {
        match self {
            DecisionSource::Fallback => "fallback",
            DecisionSource::Selection => "selection",
            DecisionSource::Optimization => "optimization",
        }
    }
}

impl fmt::Display for DecisionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    /// Zero-based observation round.
    pub round: usize,
    pub timestamp: f64,
    pub situation: SituationId,
    pub decision: AdaptationDecision,
    pub source: DecisionSource,
}

/// Per-round trace: the situation the model held when the round finished, and the index of the
/// decision emitted in that round, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub timestamp: f64,
    pub current_situation: SituationId,
    pub decision: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub current_situation: SituationId,
    pub current_decision: AdaptationDecision,
    pub attempts: BTreeMap<(SituationId, String), usize>,
    pub tried: BTreeMap<SituationId, BTreeSet<String>>,
    /// Strategy most recently chosen in each situation.
    pub last_strategy: BTreeMap<SituationId, String>,
    pub last_adaptation_round: Option<usize>,
    /// Situation of the most recent non-fallback decision.
    pub last_decided_situation: Option<SituationId>,
    pub last_was_fallback: bool,
    pub decision_log: Vec<DecisionRecord>,
    pub rounds: Vec<RoundRecord>,
}

impl SystemModel {
    pub fn attempts(&self, situation: SituationId, strategy: &str) -> usize {
        self.attempts
            .get(&(situation, strategy.to_string()))
            .copied()
            .unwrap_or(0)
    }
}

pub struct Framework {
    ddm: Arc<DomainDataModel>,
    store: ObservationStore,
    detector: SituationDetector,
    fallback: FallbackRuleSet,
    optimizer: ParameterOptimizer,
    model: SystemModel,
}

impl Framework {
    /// Initializes every component from the DDM. Rule files are resolved against `base_dir`.
    pub fn new(ddm: DomainDataModel, base_dir: &Path, seed: u64) -> Result<Self, FrameworkError> {
        let ddm = Arc::new(ddm);
        let store = ObservationStore::new(ddm.clone());
        Self::with_store(ddm, store, base_dir, seed)
    }

    /// As [`Framework::new`], with a caller-provided (possibly logging) store.
    pub fn with_store(
        ddm: Arc<DomainDataModel>,
        store: ObservationStore,
        base_dir: &Path,
        seed: u64,
    ) -> Result<Self, FrameworkError> {
        let fallback = FallbackRuleSet::load(DomainDataModel::resolve_path(base_dir, &ddm.use_case.fallback_rules))?;
        fallback.validate(&ddm)?;
        let detector = SituationDetector::from_ddm(&ddm, base_dir)?;
        let optimizer = ParameterOptimizer::new(&ddm, seed);
        let initial = fallback
            .default
            .as_ref()
            .map(AdaptationDecision::from)
            .ok_or(RuleError::MissingDefault)?;
        Ok(Self {
            ddm,
            store,
            detector,
            fallback,
            optimizer,
            model: SystemModel {
                current_situation: -1,
                current_decision: initial,
                attempts: BTreeMap::new(),
                tried: BTreeMap::new(),
                last_strategy: BTreeMap::new(),
                last_adaptation_round: None,
                last_decided_situation: None,
                last_was_fallback: false,
                decision_log: Vec::new(),
                rounds: Vec::new(),
            },
        })
    }

    pub fn ddm(&self) -> &DomainDataModel {
        &self.ddm
    }

    pub fn store(&self) -> &ObservationStore {
        &self.store
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn optimizer(&self) -> &ParameterOptimizer {
        &self.optimizer
    }

    pub fn decision_log(&self) -> &[DecisionRecord] {
        &self.model.decision_log
    }

    /// Configuration the managed system should run before any decision: the fallback default.
    pub fn initial_decision(&self) -> AdaptationDecision {
        self.fallback
            .default
            .as_ref()
            .map(AdaptationDecision::from)
            .expect("validated fallback rules have a default")
    }

    /// Warm-start setting for a strategy: the parameters of the first fallback action using it,
    /// else the midpoint of every range.
    pub fn initial_setting(&self, strategy: &str) -> ParameterSetting {
        let from_rules = self
            .fallback
            .rules
            .iter()
            .map(|r| &r.then)
            .chain(self.fallback.default.as_ref())
            .find(|a| a.strategy == strategy);
        if let Some(a) = from_rules {
            return a.parameters.clone();
        }
        let mut out = ParameterSetting::new();
        for spec in self.ddm.parameters_for_strategy(strategy).unwrap_or_default() {
            let mid = (spec.min.as_f64() + spec.max.as_f64()) / 2.0;
            let v = match spec.data_type {
                DataType::Int => Value::Int(mid.round() as i64),
                DataType::Double => Value::Double(mid),
            };
            out = out.with(&spec.name, v);
        }
        out
    }

    /// Processes one observation. Returns the decision emitted in this round, if any. Only an
    /// observation that fails validation is an error; component failures fall back to the rules.
    pub fn on_observation(&mut self, obs: Observation) -> Result<Option<AdaptationDecision>, FrameworkError> {
        self.store.ingest(obs)?;
        let round = self.store.len() - 1;
        let last = self.store.last().expect("just ingested");
        let timestamp = last.base.timestamp;
        let context = last.base.context.clone();

        let (decision, error) = match self.adapt(round, &context) {
            Ok(Step::Decided(d)) => (Some(d), None),
            Ok(Step::Wait) => (None, None),
            Ok(Step::Fallback) => (Some(self.fallback_decision(round, timestamp, &context)?), None),
            Err(e) => {
                tracing::warn!(round, error = %e, "component failure, applying fallback rules");
                self.model.current_situation = -1;
                let d = self.fallback_decision(round, timestamp, &context)?;
                (Some(d), Some(e.to_string()))
            }
        };
        self.model.rounds.push(RoundRecord {
            round,
            timestamp,
            current_situation: self.model.current_situation,
            decision: decision.as_ref().map(|_| self.model.decision_log.len() - 1),
            error,
        });
        Ok(decision)
    }

    fn adapt(&mut self, round: usize, context: &ValueMap) -> Result<Step, RoundError> {
        let timestamp = self.store.last().expect("ingested").base.timestamp;
        let detected = self.detector.detect(context);
        self.sync_labels();
        let situation = detected?;
        self.model.current_situation = situation;
        if situation < 0 {
            return Ok(Step::Fallback);
        }

        let waited = self
            .model
            .last_adaptation_round
            .is_none_or(|l| round - l >= self.ddm.selection().observations_between_adaptations);
        if !waited {
            return Ok(Step::Wait);
        }

        let changed = match self.model.last_decided_situation {
            None => false,
            Some(prev) => prev != situation || self.model.last_was_fallback,
        };
        let order = self.ddm.strategies().to_vec();
        // a situation resumes its last strategy; a new one starts at the head of the order
        let active = self
            .model
            .last_strategy
            .get(&situation)
            .cloned()
            .unwrap_or_else(|| order[0].clone());
        let attempts = self.model.attempts(situation, &active);
        let optimize_only = !changed && attempts < self.ddm.selection().min_optimization_attempts;
        let (strategy, source) = if optimize_only {
            (active.clone(), DecisionSource::Optimization)
        } else {
            let settings = self.ddm.selection();
            let history = self.store.query(&Filter::default().situation(situation));
            let window_start = history.len().saturating_sub(settings.window_size);
            let empty = BTreeSet::new();
            let ctx = SelectionContext {
                current_strategy: &active,
                attempts_done: attempts,
                window: &history[window_start..],
                tried: self.model.tried.get(&situation).unwrap_or(&empty),
                situation_history: &history,
                settings,
                measures: &self.ddm.performance_measures,
            };
            (select_explained(&ctx, &order)?.strategy, DecisionSource::Selection)
        };

        let key = SurrogateKey::new(situation, &strategy);
        let fresh_state = self.optimizer.state(&key).is_none();
        self.optimizer.activate(&key, &self.store)?;
        let latest = self.store.last().expect("ingested");
        if !fresh_state && latest.situation == situation && latest.base.input.strategy == strategy {
            let (params, hv) = (latest.base.input.parameters.clone(), latest.hypervolume);
            self.optimizer.observe(&key, params, hv)?;
        }
        let current = if strategy == self.model.current_decision.strategy {
            self.model.current_decision.parameters.clone()
        } else {
            self.initial_setting(&strategy)
        };
        let parameters = match self.optimizer.propose(&key, &current) {
            Ok(p) => p,
            Err(ParamoptError::NoParameters) => ParameterSetting::new(),
            Err(e) => return Err(e.into()),
        };

        if strategy != active {
            self.model.attempts.insert((situation, strategy.clone()), 0);
        }
        *self.model.attempts.entry((situation, strategy.clone())).or_insert(0) += 1;
        self.model.tried.entry(situation).or_default().insert(strategy.clone());
        self.model.last_strategy.insert(situation, strategy.clone());
        self.model.last_adaptation_round = Some(round);
        self.model.last_decided_situation = Some(situation);
        self.model.last_was_fallback = false;
        let decision = AdaptationDecision::new(strategy, parameters);
        self.record(round, timestamp, situation, decision.clone(), source);
        Ok(Step::Decided(decision))
    }

    fn fallback_decision(
        &mut self,
        round: usize,
        timestamp: f64,
        context: &ValueMap,
    ) -> Result<AdaptationDecision, FrameworkError> {
        let decision = apply_fallback(&self.fallback, context)?;
        if decision != self.model.current_decision {
            self.model.last_adaptation_round = Some(round);
        }
        self.model.last_was_fallback = true;
        self.record(round, timestamp, -1, decision.clone(), DecisionSource::Fallback);
        Ok(decision)
    }

    fn record(
        &mut self,
        round: usize,
        timestamp: f64,
        situation: SituationId,
        decision: AdaptationDecision,
        source: DecisionSource,
    ) {
        tracing::debug!(round, situation, strategy = %decision.strategy, %source, "decision");
        self.model.current_decision = decision.clone();
        self.model.decision_log.push(DecisionRecord {
            round,
            timestamp,
            situation,
            decision,
            source,
        });
    }

    /// Copies the detector's stabilized labels into the store. When earlier rows change
    /// situation, cached surrogates are dropped and rebuilt from the store on next use.
    fn sync_labels(&mut self) {
        let labels = self.detector.labels();
        let n = labels.len().min(self.store.len());
        let before: usize = n.saturating_sub(1);
        let changed_before = self
            .store
            .rows()
            .iter()
            .zip(labels)
            .take(before)
            .filter(|(r, &l)| r.situation != l)
            .count();
        self.store
            .assign_situations(&labels[..n])
            .expect("detector and store stay aligned");
        if changed_before > 0 {
            self.optimizer.invalidate();
        }
    }

    pub fn write_decisions_csv(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        write_decisions_csv(path, &self.model.decision_log)
    }

    pub fn write_surrogates(&self, dir: &Path) -> Result<(), ParamoptError> {
        self.optimizer.write_snapshots(dir)
    }
}

/// Writes `timestamp,round,situation,strategy,parameters,source` rows.
pub fn write_decisions_csv(path: impl AsRef<Path>, records: &[DecisionRecord]) -> Result<(), StoreError> {
    let io = |e: csv::Error| StoreError::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["timestamp", "round", "situation", "strategy", "parameters", "source"])
        .map_err(io)?;
    for d in records {
        w.write_record([
            d.timestamp.to_string(),
            d.round.to_string(),
            d.situation.to_string(),
            d.decision.strategy.clone(),
            d.decision.parameters.compact(),
            d.source.name().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
