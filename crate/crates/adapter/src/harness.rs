//! Closed loop between the simulator and a planner: simulate a window, preprocess, hand the
//! observation to the planner, execute whatever it decides, repeat.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sao_core::rules::{apply_fallback, RuleError};
use sao_core::{
    write_decisions_csv, AdaptationDecision, DecisionRecord, DecisionSource, DomainDataModel, FallbackRuleSet,
    Framework, FrameworkError, Observation, ObservationStore, ParameterSetting, StoreError, Value,
};
use sao_platoon::{Scenario, Simulator, StrategyConfig, StrategyError};
use thiserror::Error;

use crate::client::{AdapterClient, ClientError};
use crate::executor::execute;
use crate::preprocess::{PreprocessError, Preprocessor};
use crate::service::{Server, ServiceError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("initial configuration: {0}")]
    InitialConfig(StrategyError),
    #[error("simulation diverged at t = {0} s")]
    Diverged(f64),
    #[error("writing {path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

/// Anything that turns observations into adaptation decisions.
pub trait Planner {
    /// Configuration the simulator starts with.
    fn initial(&mut self) -> Result<AdaptationDecision, HarnessError>;
    fn observe(&mut self, obs: Observation) -> Result<Option<AdaptationDecision>, HarnessError>;
}

impl Planner for Framework {
    fn initial(&mut self) -> Result<AdaptationDecision, HarnessError> {
        Ok(self.initial_decision())
    }

    fn observe(&mut self, obs: Observation) -> Result<Option<AdaptationDecision>, HarnessError> {
        Ok(self.on_observation(obs)?)
    }
}

/// Talks to an adapter service: posts each observation, then polls for a newer decision.
pub struct RemotePlanner {
    client: AdapterClient,
    seq: u64,
    /// Sequence numbers of the decisions received, in order.
    pub received: Vec<u64>,
}

impl RemotePlanner {
    pub fn new(client: AdapterClient) -> Self {
        Self {
            client,
            seq: 0,
            received: Vec::new(),
        }
    }
}

impl Planner for RemotePlanner {
    fn initial(&mut self) -> Result<AdaptationDecision, HarnessError> {
        let a = self.client.adaptation()?;
        self.seq = a.seq;
        Ok(a.decision())
    }

    fn observe(&mut self, obs: Observation) -> Result<Option<AdaptationDecision>, HarnessError> {
        self.client.post_observation(&obs)?;
        let a = self.client.adaptation()?;
        if a.seq == self.seq {
            return Ok(None);
        }
        self.seq = a.seq;
        self.received.push(a.seq);
        Ok(Some(a.decision()))
    }
}

/// Baselines run without the framework; their observations still go through a store so they
/// get the same hypervolume scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    BestDistance,
    BestVelocity,
    /// The fallback rules, evaluated on every window.
    Rules,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::BestDistance, Baseline::BestVelocity, Baseline::Rules];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::BestDistance => "BestDistance",
            Baseline::BestVelocity => "BestVelocity",
            Baseline::Rules => "Rules",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name().eq_ignore_ascii_case(name))
    }

    /// Fixed configuration of the two single-strategy baselines.
    pub fn fixed_decision(self) -> Option<AdaptationDecision> {
        let setting = match self {
            Baseline::BestDistance => ParameterSetting::new()
                .with("advertising_duration", Value::Int(10))
                .with("max_speed_difference", Value::Double(35.0)),
            Baseline::BestVelocity => ParameterSetting::new()
                .with("advertising_duration", Value::Int(10))
                .with("search_distance_front", Value::Double(600.0))
                .with("search_distance_back", Value::Double(250.0)),
            Baseline::Rules => return None,
        };
        Some(AdaptationDecision::new(self.name(), setting))
    }
}

struct BaselinePlanner {
    store: ObservationStore,
    rules: Option<FallbackRuleSet>,
    active: AdaptationDecision,
    decisions: Vec<DecisionRecord>,
}

impl Planner for BaselinePlanner {
    fn initial(&mut self) -> Result<AdaptationDecision, HarnessError> {
        Ok(self.active.clone())
    }

    fn observe(&mut self, obs: Observation) -> Result<Option<AdaptationDecision>, HarnessError> {
        let round = self.store.len();
        let row = self.store.ingest(obs)?;
        let Some(rules) = &self.rules else {
            return Ok(None);
        };
        let decision = apply_fallback(rules, &row.base.context)?;
        if decision == self.active {
            return Ok(None);
        }
        self.decisions.push(DecisionRecord {
            round,
            timestamp: row.base.timestamp,
            situation: row.situation,
            decision: decision.clone(),
            source: DecisionSource::Fallback,
        });
        self.active = decision.clone();
        Ok(Some(decision))
    }
}

/// Runs the whole scenario against `planner`. Returns the number of observations emitted.
pub fn run_loop(scenario: &Scenario, planner: &mut impl Planner) -> Result<usize, HarnessError> {
    let mut active = planner.initial()?;
    let config = StrategyConfig::new(&active.strategy, &active.parameters).map_err(HarnessError::InitialConfig)?;
    let mut sim = Simulator::new(scenario.clone(), config);
    let mut pre = Preprocessor::new();
    let windows = scenario.windows();
    for _ in 0..windows {
        let raw = sim.run_window();
        if !sim.is_finite() {
            return Err(HarnessError::Diverged(sim.time()));
        }
        let obs = pre.preprocess(&raw, scenario.window_s, &active)?;
        if let Some(decision) = planner.observe(obs)? {
            match execute(&mut sim, &decision) {
                Ok(_) => active = decision,
                Err(e) => tracing::warn!(error = %e, "decision not executable, keeping configuration"),
            }
        }
    }
    Ok(windows)
}

/// Everything a finished run leaves behind.
pub enum RunOutput {
    Framework(Box<Framework>),
    Baseline {
        store: ObservationStore,
        decisions: Vec<DecisionRecord>,
    },
}

impl RunOutput {
    pub fn store(&self) -> &ObservationStore {
        match self {
            RunOutput::Framework(f) => f.store(),
            RunOutput::Baseline { store, .. } => store,
        }
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        match self {
            RunOutput::Framework(f) => f.decision_log(),
            RunOutput::Baseline { decisions, .. } => decisions,
        }
    }

    /// Hypervolume of every observation, in order.
    pub fn hypervolumes(&self) -> Vec<(f64, f64)> {
        self.store()
            .rows()
            .iter()
            .map(|r| (r.base.timestamp, r.hypervolume))
            .collect()
    }

    /// Writes `observations.csv`, `store.jsonl`, `decisions.csv` and, for framework runs, the
    /// surrogate snapshots under `surrogates/`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let fail = |path: PathBuf, e: &dyn std::fmt::Display| HarnessError::Output {
            path,
            reason: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(|e| fail(dir.to_path_buf(), &e))?;
        let store = self.store();
        let path = dir.join("observations.csv");
        store.write_csv(&path).map_err(|e| fail(path, &e))?;
        let path = dir.join("store.jsonl");
        store.write_jsonl(&path).map_err(|e| fail(path, &e))?;
        let path = dir.join("decisions.csv");
        write_decisions_csv(&path, self.decisions()).map_err(|e| fail(path, &e))?;
        if let RunOutput::Framework(f) = self {
            let path = dir.join("surrogates");
            fs::create_dir_all(&path).map_err(|e| fail(path.clone(), &e))?;
            f.write_surrogates(&path).map_err(|e| fail(path, &e))?;
        }
        Ok(())
    }
}

/// Framework and simulator in one process, no transport in between.
pub fn run_in_process(scenario: &Scenario, mut framework: Framework) -> Result<RunOutput, HarnessError> {
    run_loop(scenario, &mut framework)?;
    Ok(RunOutput::Framework(Box::new(framework)))
}

/// Framework behind the HTTP service on a loopback port; the simulator reaches it through the
/// client. Also returns the sequence numbers of the decisions the simulator received.
pub fn run_http(scenario: &Scenario, framework: Framework) -> Result<(RunOutput, Vec<u64>), HarnessError> {
    let server = Server::start(framework, SocketAddr::from(([127, 0, 0, 1], 0)))?;
    let mut planner = RemotePlanner::new(AdapterClient::local(server.addr()));
    let result = run_loop(scenario, &mut planner);
    let framework = server.shutdown()?;
    result?;
    Ok((RunOutput::Framework(Box::new(framework)), planner.received))
}

/// Runs a baseline. `base_dir` resolves the DDM's fallback rule file for [`Baseline::Rules`].
pub fn run_baseline(
    scenario: &Scenario,
    ddm: Arc<DomainDataModel>,
    base_dir: &Path,
    baseline: Baseline,
) -> Result<RunOutput, HarnessError> {
    let (rules, active) = match baseline.fixed_decision() {
        Some(d) => (None, d),
        None => {
            let path = DomainDataModel::resolve_path(base_dir, &ddm.use_case.fallback_rules);
            let rules = FallbackRuleSet::load(path)?;
            rules.validate(&ddm)?;
            let initial = rules
                .default
                .as_ref()
                .map(AdaptationDecision::from)
                .ok_or(RuleError::MissingDefault)?;
            (Some(rules), initial)
        }
    };
    let mut planner = BaselinePlanner {
        store: ObservationStore::new(ddm),
        rules,
        active,
        decisions: Vec::new(),
    };
    run_loop(scenario, &mut planner)?;
    Ok(RunOutput::Baseline {
        store: planner.store,
        decisions: planner.decisions,
    })
}
