//! Bayesian optimization of a strategy's parameter setting, one surrogate per
//! (situation, strategy) pair.

pub mod gp;
pub mod halton;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddm::{DomainDataModel, ParameterOptionSpec};
use crate::store::ObservationStore;
use crate::value::{DataType, ParameterSetting, Value};
use crate::SituationId;

pub use gp::{expected_improvement, GaussianProcess, GpError};
pub use halton::ShiftedHalton;

/// Evaluations needed before the surrogate drives proposals.
pub const N_INIT: usize = 3;
pub const N_CANDIDATES: u64 = 512;
const PERTURBATIONS: [f64; 8] = [0.02, -0.02, 0.05, -0.05, 0.1, -0.1, 0.2, -0.2];
/// Observations folded in with fixed hyperparameters before a full refit.
const REFIT_EVERY: usize = 5;

#[derive(Debug, Error)]
pub enum ParamoptError {
    #[error("strategy has no tunable parameters")]
    NoParameters,
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Surrogate(#[from] GpError),
    #[error("surrogate snapshot: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SurrogateKey {
    pub situation: SituationId,
    pub strategy: String,
}

impl SurrogateKey {
    pub fn new(situation: SituationId, strategy: &str) -> Self {
        Self {
            situation,
            strategy: strategy.to_string(),
        }
    }

    /// Stable 64-bit FNV-1a hash, used to derive per-key seeds.
    pub fn stable_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.situation.to_le_bytes().iter().chain(self.strategy.as_bytes()) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub parameters: ParameterSetting,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub key: SurrogateKey,
    pub evaluations: Vec<Evaluation>,
    model: Option<GaussianProcess<f64>>,
    since_refit: usize,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    situation: SituationId,
    strategy: &'a str,
    evaluations: &'a [Evaluation],
    lengthscale: Option<f64>,
    signal_variance: Option<f64>,
}

impl SurrogateState {
    pub fn empty(key: SurrogateKey) -> Self {
        Self {
            key,
            evaluations: Vec::new(),
            model: None,
            since_refit: 0,
        }
    }

    pub fn model(&self) -> Option<&GaussianProcess<f64>> {
        self.model.as_ref()
    }

    fn training(&self, specs: &[ParameterOptionSpec]) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.evaluations
            .iter()
            .map(|e| (encode(&e.parameters, specs), e.score))
            .unzip()
    }

    fn refit(&mut self, specs: &[ParameterOptionSpec]) -> Result<(), GpError> {
        let (x, y) = self.training(specs);
        self.model = Some(GaussianProcess::fit(&x, &y)?);
        self.since_refit = 0;
        Ok(())
    }

    fn update(&mut self, specs: &[ParameterOptionSpec]) -> Result<(), GpError> {
        match &self.model {
            Some(m) if self.since_refit < REFIT_EVERY => {
                let (x, y) = self.training(specs);
                self.model = Some(GaussianProcess::with_lengthscale(&x, &y, m.lengthscale())?);
                Ok(())
            }
            _ => self.refit(specs),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Snapshot {
            situation: self.key.situation,
            strategy: &self.key.strategy,
            evaluations: &self.evaluations,
            lengthscale: self.model.as_ref().map(|m| m.lengthscale()),
            signal_variance: self.model.as_ref().map(|m| m.signal_variance()),
        })
        .expect("snapshot serializes")
    }
}

/// Maps a setting into the unit cube in spec order.
pub fn encode(setting: &ParameterSetting, specs: &[ParameterOptionSpec]) -> Vec<f64> {
    specs
        .iter()
        .map(|s| {
            let (lo, hi) = (s.min.as_f64(), s.max.as_f64());
            let v = setting.get(&s.name).map_or(lo, |v| v.as_f64());
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Maps a unit-cube point back to typed, in-bounds values. Integers are rounded.
pub fn decode(u: &[f64], specs: &[ParameterOptionSpec]) -> ParameterSetting {
    let mut out = ParameterSetting::new();
    for (s, &ui) in specs.iter().zip(u) {
        let (lo, hi) = (s.min.as_f64(), s.max.as_f64());
        let raw = (lo + ui.clamp(0.0, 1.0) * (hi - lo)).clamp(lo, hi);
        let v = match s.data_type {
            DataType::Int => Value::Int(raw.round() as i64),
            DataType::Double => Value::Double(raw),
        };
        out = out.with(&s.name, v);
    }
    out
}

/// One proposal given an evaluation history. `model` must be fitted on `history` when
/// `history.len() >= N_INIT`; it is ignored otherwise. `seed` fixes the sequence shift, so the
/// early space-filling points of one key come from a single shifted sequence.
pub fn propose_with(
    history: &[Evaluation],
    specs: &[ParameterOptionSpec],
    current: &ParameterSetting,
    model: Option<&GaussianProcess<f64>>,
    seed: u64,
) -> Result<ParameterSetting, ParamoptError> {
    if specs.is_empty() {
        return Err(ParamoptError::NoParameters);
    }
    if history.is_empty() {
        return Ok(current.clone());
    }
    let evaluated = |p: &ParameterSetting| history.iter().any(|e| &e.parameters == p);
    let dim = specs.len();
    let halton = ShiftedHalton::new(dim, seed);

    if history.len() < N_INIT || model.is_none() {
        let first = decode(&halton.point(history.len() as u64), specs);
        if !evaluated(&first) {
            return Ok(first);
        }
        return Ok(decode(&halton.point(history.len() as u64 + N_INIT as u64), specs));
    }
    let model = model.expect("checked above");
    let incumbent = history
        .iter()
        .fold(None::<&Evaluation>, |b, e| match b {
            Some(b) if b.score >= e.score => Some(b),
            _ => Some(e),
        })
        .expect("history is nonempty");
    let inc = encode(&incumbent.parameters, specs);

    // a fresh stretch of the sequence each round
    let offset = history.len() as u64 * N_CANDIDATES;
    let mut candidates: Vec<Vec<f64>> = (offset..offset + N_CANDIDATES).map(|i| halton.point(i)).collect();
    for (i, delta) in PERTURBATIONS.iter().enumerate() {
        let mut c = inc.clone();
        c[i % dim] = (c[i % dim] + delta).clamp(0.0, 1.0);
        candidates.push(c);
    }
    let best = model.best_target();
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (mu, var) = model.predict(c);
            (expected_improvement(mu, var, best), i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let first = decode(&candidates[scored[0].1], specs);
    if !evaluated(&first) {
        return Ok(first);
    }
    // one re-proposal: the best remaining candidate that decodes to a fresh setting
    for &(_, i) in &scored[1..] {
        let p = decode(&candidates[i], specs);
        if !evaluated(&p) {
            return Ok(p);
        }
    }
    Ok(first)
}

/// Per-framework optimizer holding one surrogate per (situation, strategy).
pub struct ParameterOptimizer {
    specs: HashMap<String, Vec<ParameterOptionSpec>>,
    states: HashMap<SurrogateKey, SurrogateState>,
    active: Option<SurrogateKey>,
    base_seed: u64,
}

impl ParameterOptimizer {
    pub fn new(ddm: &DomainDataModel, base_seed: u64) -> Self {
        let specs = ddm
            .strategies()
            .iter()
            .map(|s| {
                let list = ddm
                    .parameters_for_strategy(s)
                    .expect("declared strategy")
                    .into_iter()
                    .cloned()
                    .collect();
                (s.clone(), list)
            })
            .collect();
        Self {
            specs,
            states: HashMap::new(),
            active: None,
            base_seed,
        }
    }

    pub fn specs(&self, strategy: &str) -> Result<&[ParameterOptionSpec], ParamoptError> {
        self.specs
            .get(strategy)
            .map(Vec::as_slice)
            .ok_or_else(|| ParamoptError::UnknownStrategy(strategy.to_string()))
    }

    pub fn state(&self, key: &SurrogateKey) -> Option<&SurrogateState> {
        self.states.get(key)
    }

    pub fn states(&self) -> impl Iterator<Item = &SurrogateState> {
        self.states.values()
    }

    /// Makes `key` the active surrogate: the cached state, else one rebuilt from the store's
    /// history for the key, else an empty state. Rebuilt and re-activated states get a full refit.
    pub fn activate(&mut self, key: &SurrogateKey, store: &ObservationStore) -> Result<&SurrogateState, ParamoptError> {
        let specs = self.specs(&key.strategy)?.to_vec();
        if !self.states.contains_key(key) {
            let mut state = SurrogateState::empty(key.clone());
            state.evaluations = history_from_store(store, key);
            self.states.insert(key.clone(), state);
        }
        let state = self.states.get_mut(key).expect("inserted above");
        if self.active.as_ref() != Some(key) && !state.evaluations.is_empty() && !specs.is_empty() {
            state.refit(&specs)?;
        }
        self.active = Some(key.clone());
        Ok(state)
    }

    /// Records one evaluation for `key`; the model is updated incrementally while the key stays
    /// active and refit periodically.
    pub fn observe(
        &mut self,
        key: &SurrogateKey,
        setting: ParameterSetting,
        score: f64,
    ) -> Result<&SurrogateState, ParamoptError> {
        let specs = self.specs(&key.strategy)?.to_vec();
        let incremental = self.active.as_ref() == Some(key);
        let state = self
            .states
            .entry(key.clone())
            .or_insert_with(|| SurrogateState::empty(key.clone()));
        state.evaluations.push(Evaluation {
            parameters: setting,
            score,
        });
        if !specs.is_empty() {
            if incremental {
                state.since_refit += 1;
                state.update(&specs)?;
            } else {
                state.refit(&specs)?;
            }
        }
        self.active = Some(key.clone());
        Ok(state)
    }

    pub fn propose(
        &mut self,
        key: &SurrogateKey,
        current: &ParameterSetting,
    ) -> Result<ParameterSetting, ParamoptError> {
        let specs = self.specs(&key.strategy)?.to_vec();
        let state = self
            .states
            .entry(key.clone())
            .or_insert_with(|| SurrogateState::empty(key.clone()));
        if state.evaluations.len() >= N_INIT && state.model.is_none() && !specs.is_empty() {
            state.refit(&specs)?;
        }
        let seed = self.base_seed ^ key.stable_hash();
        propose_with(&state.evaluations, &specs, current, state.model.as_ref(), seed)
    }

    /// Drops every cached state; they are rebuilt from the store on next activation.
    pub fn invalidate(&mut self) {
        self.states.clear();
        self.active = None;
    }

    /// Writes one JSON snapshot per surrogate into `dir`.
    pub fn write_snapshots(&self, dir: &Path) -> Result<(), ParamoptError> {
        fs::create_dir_all(dir)?;
        let mut keys: Vec<&SurrogateKey> = self.states.keys().collect();
        keys.sort();
        for key in keys {
            let name = format!("situation_{}__{}.json", key.situation, key.strategy);
            fs::write(dir.join(name), self.states[key].to_json())?;
        }
        Ok(())
    }
}

/// Evaluations implied by the store for `key`: the last observation of every contiguous run of
/// an unchanged configuration, restricted to rows of the key's situation and strategy.
pub fn history_from_store(store: &ObservationStore, key: &SurrogateKey) -> Vec<Evaluation> {
    let rows = store.rows();
    rows.iter()
        .enumerate()
        .filter(|(i, r)| {
            let run_end = rows.get(i + 1).is_none_or(|next| next.base.input != r.base.input);
            run_end && r.situation == key.situation && r.base.input.strategy == key.strategy
        })
        .map(|(_, r)| Evaluation {
            parameters: r.base.input.parameters.clone(),
            score: r.hypervolume,
        })
        .collect()
}
