//! Empirical observations repository: validation, enrichment, persistence and queries.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddm::DomainDataModel;
use crate::hypervolume::{compute_hypervolume, HypervolumeError};
use crate::rules::check_decision;
use crate::value::{AdaptationDecision, ValueMap};
use crate::SituationId;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("observation violates the Domain-Data-Model: {}", .0.join("; "))]
    SchemaViolation(Vec<String>),
    #[error("timestamp {got} precedes the previous observation at {previous}")]
    NonMonotonicTimestamp { previous: f64, got: f64 },
    #[error(transparent)]
    Hypervolume(#[from] HypervolumeError),
    #[error("observation log: {0}")]
    Io(#[from] std::io::Error),
    #[error("observation log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("{0} labels given for {1} stored observations")]
    LengthMismatch(usize, usize),
}

/// One timestamped (context, input, metrics) triple from the managed system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Seconds since run start.
    pub timestamp: f64,
    pub context: ValueMap,
    pub input: AdaptationDecision,
    pub metrics: ValueMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedObservation {
    #[serde(flatten)]
    pub base: Observation,
    pub hypervolume: f64,
    /// Seconds the current (strategy, parameters) input has been active.
    pub config_active_for: f64,
    pub situation: SituationId,
}

/// Checks keys and types against the DDM and returns the observation with values coerced to the
/// declared types. All problems are reported together.
pub fn validate_observation(ddm: &DomainDataModel, obs: &Observation) -> Result<Observation, StoreError> {
    let mut issues = Vec::new();
    if !obs.timestamp.is_finite() || obs.timestamp < 0.0 {
        issues.push(format!("timestamp {} is not a non-negative number", obs.timestamp));
    }

    let mut context = ValueMap::new();
    for (name, spec) in &ddm.context.data {
        match obs.context.get(name) {
            None => issues.push(format!("context.{name} missing")),
            Some(v) if !v.is_finite() => issues.push(format!("context.{name} is not finite")),
            Some(v) => match v.coerce(spec.data_type) {
                Some(c) => {
                    context.insert(name.clone(), c);
                }
                None => issues.push(format!("context.{name} must be {}", spec.data_type.name())),
            },
        }
    }
    for name in obs.context.keys() {
        if !ddm.context.data.contains_key(name) {
            issues.push(format!("context.{name} is not declared"));
        }
    }

    let mut metrics = ValueMap::new();
    for (name, spec) in &ddm.performance_measures {
        match obs.metrics.get(name) {
            None => issues.push(format!("metrics.{name} missing")),
            Some(v) if !v.is_finite() => issues.push(format!("metrics.{name} is not finite")),
            Some(v) => match v.coerce(spec.data_type) {
                Some(c) => {
                    metrics.insert(name.clone(), c);
                }
                None => issues.push(format!("metrics.{name} must be {}", spec.data_type.name())),
            },
        }
    }
    for name in obs.metrics.keys() {
        if !ddm.performance_measures.contains_key(name) {
            issues.push(format!("metrics.{name} is not declared"));
        }
    }

    let mut input = obs.input.clone();
    match check_decision(ddm, &input.strategy, &input.parameters) {
        Err(reason) => issues.push(format!("input: {reason}")),
        Ok(()) => {
            for spec in ddm.parameters_for_strategy(&input.strategy).unwrap_or_default() {
                if let Some(v) = input.parameters.get(&spec.name).and_then(|v| v.coerce(spec.data_type)) {
                    input.parameters.0.insert(spec.name.clone(), v);
                }
            }
        }
    }

    if issues.is_empty() {
        Ok(Observation {
            timestamp: obs.timestamp,
            context,
            input,
            metrics,
        })
    } else {
        Err(StoreError::SchemaViolation(issues))
    }
}

/// Filter for [`ObservationStore::query`]. Absent fields match everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    pub situation: Option<SituationId>,
    pub strategy: Option<String>,
    pub last_n: Option<usize>,
}

impl Filter {
    pub fn situation(mut self, s: SituationId) -> Self {
        self.situation = Some(s);
        self
    }

    pub fn strategy(mut self, s: &str) -> Self {
        self.strategy = Some(s.to_string());
        self
    }

    pub fn last_n(mut self, n: usize) -> Self {
        self.last_n = Some(n);
        self
    }

    fn matches(&self, o: &EnrichedObservation) -> bool {
        self.situation.is_none_or(|s| o.situation == s)
            && self.strategy.as_deref().is_none_or(|s| o.base.input.strategy == s)
    }
}

/// Append-only, chronologically ordered observation store.
pub struct ObservationStore {
    ddm: Arc<DomainDataModel>,
    rows: Vec<EnrichedObservation>,
    log: Option<BufWriter<File>>,
}

impl ObservationStore {
    pub fn new(ddm: Arc<DomainDataModel>) -> Self {
        Self {
            ddm,
            rows: Vec::new(),
            log: None,
        }
    }

    /// Store that also appends every ingested record to a line-delimited JSON log.
    pub fn with_log(ddm: Arc<DomainDataModel>, path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            ddm,
            rows: Vec::new(),
            log: Some(BufWriter::new(file)),
        })
    }

    /// Replays a log written by [`ObservationStore::with_log`] or [`ObservationStore::write_jsonl`].
    /// Hypervolumes are recomputed against the given DDM; situation labels are kept.
    pub fn load_jsonl(ddm: Arc<DomainDataModel>, path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let reader = BufReader::new(File::open(path)?);
        let mut store = Self::new(ddm);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EnrichedObservation = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            let situation = rec.situation;
            store.ingest(rec.base)?;
            if let Some(last) = store.rows.last_mut() {
                last.situation = situation;
            }
        }
        Ok(store)
    }

    pub fn ddm(&self) -> &DomainDataModel {
        &self.ddm
    }

    /// Validates, enriches and appends one observation.
    pub fn ingest(&mut self, obs: Observation) -> Result<&EnrichedObservation, StoreError> {
        let obs = validate_observation(&self.ddm, &obs)?;
        let config_active_for = match self.rows.last() {
            Some(prev) => {
                if obs.timestamp < prev.base.timestamp {
                    return Err(StoreError::NonMonotonicTimestamp {
                        previous: prev.base.timestamp,
                        got: obs.timestamp,
                    });
                }
                if prev.base.input == obs.input {
                    prev.config_active_for + (obs.timestamp - prev.base.timestamp)
                } else {
                    0.0
                }
            }
            None => 0.0,
        };
        let hypervolume = compute_hypervolume(&obs.metrics, &self.ddm.performance_measures)?;
        let rec = EnrichedObservation {
            base: obs,
            hypervolume,
            config_active_for,
            situation: -1,
        };
        if let Some(log) = self.log.as_mut() {
            serde_json::to_writer(&mut *log, &rec).map_err(std::io::Error::other)?;
            log.write_all(b"\n")?;
            log.flush()?;
        }
        self.rows.push(rec);
        Ok(self.rows.last().expect("just pushed"))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[EnrichedObservation] {
        &self.rows
    }

    pub fn last(&self) -> Option<&EnrichedObservation> {
        self.rows.last()
    }

    /// Rows matching every present filter field, oldest first.
    pub fn query(&self, filter: &Filter) -> Vec<&EnrichedObservation> {
        match filter.last_n {
            None => self.rows.iter().filter(|o| filter.matches(o)).collect(),
            Some(n) => {
                let mut out: Vec<_> = self.rows.iter().rev().filter(|o| filter.matches(o)).take(n).collect();
                out.reverse();
                out
            }
        }
    }

    /// Substitutes situation labels. Unmapped labels are left unchanged.
    pub fn relabel(&mut self, mapping: &HashMap<SituationId, SituationId>) -> usize {
        let mut changed = 0;
        for row in &mut self.rows {
            if let Some(&to) = mapping.get(&row.situation) {
                if to != row.situation {
                    row.situation = to;
                    changed += 1;
                }
            }
        }
        changed
    }

    /// Overwrites the labels of the first `labels.len()` rows; returns how many changed.
    pub fn assign_situations(&mut self, labels: &[SituationId]) -> Result<usize, StoreError> {
        if labels.len() > self.rows.len() {
            return Err(StoreError::LengthMismatch(labels.len(), self.rows.len()));
        }
        let mut changed = 0;
        for (row, &l) in self.rows.iter_mut().zip(labels) {
            if row.situation != l {
                row.situation = l;
                changed += 1;
            }
        }
        Ok(changed)
    }

    pub fn set_last_situation(&mut self, s: SituationId) {
        if let Some(last) = self.rows.last_mut() {
            last.situation = s;
        }
    }

    /// Full snapshot, one JSON record per line.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let mut w = BufWriter::new(File::create(path)?);
        for row in &self.rows {
            serde_json::to_writer(&mut w, row).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Flat CSV export: timestamp, situation, strategy, parameters, context and metric columns,
    /// hypervolume and config_active_for.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        let ctx: Vec<&String> = self.ddm.context.data.keys().collect();
        let met: Vec<&String> = self.ddm.performance_measures.keys().collect();
        let mut header = vec![
            "timestamp".to_string(),
            "situation".into(),
            "strategy".into(),
            "parameters".into(),
        ];
        header.extend(ctx.iter().map(|s| s.to_string()));
        header.extend(met.iter().map(|s| s.to_string()));
        header.push("hypervolume".into());
        header.push("config_active_for".into());
        w.write_record(&header).map_err(csv_io)?;
        for row in &self.rows {
            let mut rec = vec![
                row.base.timestamp.to_string(),
                row.situation.to_string(),
                row.base.input.strategy.clone(),
                row.base.input.parameters.compact(),
            ];
            rec.extend(ctx.iter().map(|k| row.base.context[*k].to_string()));
            rec.extend(met.iter().map(|k| row.base.metrics[*k].to_string()));
            rec.push(row.hypervolume.to_string());
            rec.push(row.config_active_for.to_string());
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> StoreError {
    StoreError::Io(std::io::Error::other(e))
}
