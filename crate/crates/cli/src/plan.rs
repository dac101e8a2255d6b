//! Experiment plans and the files they resolve to.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use sao_adapter::Baseline;
use sao_core::ddm::SettingValue;
use sao_core::{DetectionAlgorithm, DomainDataModel, SelectionMethod, Value};
use sao_platoon::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    #[default]
    InProcess,
    /// Framework behind the REST service on a loopback port.
    Http,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub ddm: PathBuf,
    pub scenario: PathBuf,
    /// Overrides the DDM's detection algorithm. Ignored for baselines.
    pub detection: Option<DetectionAlgorithm>,
    /// Overrides the DDM's selection trigger. Ignored for baselines.
    pub trigger: Option<SelectionMethod>,
    pub baseline: Option<Baseline>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub transport: Transport,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::InvalidPlan("at least one seed is required".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(CliError::InvalidPlan("seeds must be distinct".into()));
        }
        for path in [&self.ddm, &self.scenario] {
            if !path.is_file() {
                return Err(CliError::ConfigNotFound(path.clone()));
            }
        }
        Ok(())
    }

    pub fn load_scenario(&self) -> Result<Scenario, CliError> {
        Ok(Scenario::from_path(&self.scenario)?)
    }

    /// The DDM with the plan's detection and trigger overrides applied.
    pub fn load_ddm(&self) -> Result<DomainDataModel, CliError> {
        let bad = |source| CliError::Ddm {
            path: self.ddm.clone(),
            source,
        };
        let mut ddm = DomainDataModel::from_path(&self.ddm).map_err(bad)?;
        if let Some(alg) = self.detection {
            if alg != ddm.detection().algorithm {
                ddm = ddm.with_detection(alg, detection_preset(alg)).map_err(bad)?;
            }
        }
        if let Some(method) = self.trigger {
            ddm = ddm.with_method(method).map_err(bad)?;
        }
        Ok(ddm)
    }

    /// Directory the DDM's relative rule paths resolve against.
    pub fn base_dir(&self) -> &Path {
        self.ddm.parent().unwrap_or(Path::new("."))
    }

    /// Short label of the compared configuration, e.g. `RuleBased & hypervolume`.
    pub fn configuration(&self, ddm: &DomainDataModel) -> String {
        match self.baseline {
            Some(b) => b.name().to_string(),
            None => format!("{} & {}", ddm.detection().algorithm, ddm.selection().method),
        }
    }

    /// Directory name of the cell, e.g. `weekday-OPTICS-threshold`.
    pub fn cell_name(&self, scenario: &Scenario, ddm: &DomainDataModel) -> String {
        match self.baseline {
            Some(b) => format!("{}-{}", scenario.name, b.name()),
            None => format!(
                "{}-{}-{}",
                scenario.name,
                ddm.detection().algorithm,
                ddm.selection().method
            ),
        }
    }
}

/// Detector settings used when a plan switches the DDM to another algorithm. All of them
/// cluster on the vehicle count only, like the rule-based bands.
pub fn detection_preset(alg: DetectionAlgorithm) -> IndexMap<String, SettingValue> {
    let num = |v: i64| SettingValue::Number(Value::Int(v));
    let mut s = IndexMap::new();
    match alg {
        DetectionAlgorithm::RuleBased => {
            s.insert("rules".into(), SettingValue::Text("situation_rules.yaml".into()));
        }
        DetectionAlgorithm::Optics => {
            s.insert("min_samples".into(), num(45));
            s.insert("min_cluster_size".into(), num(45));
        }
        DetectionAlgorithm::Dbscan => {
            s.insert("eps".into(), num(3));
            s.insert("min_samples".into(), num(45));
        }
        DetectionAlgorithm::KMeans => {
            s.insert("k_min".into(), num(1));
            s.insert("k_max".into(), num(6));
        }
    }
    if alg != DetectionAlgorithm::RuleBased {
        s.insert("features".into(), SettingValue::Text("vehicles".into()));
    }
    s
}

/// Written next to the seed directories so `report` never needs the original inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub name: String,
    pub scenario: String,
    pub configuration: String,
    pub detection: Option<String>,
    pub trigger: Option<String>,
    pub baseline: Option<String>,
    pub seeds: Vec<u64>,
    pub metrics: Vec<String>,
    pub windows: usize,
    pub window_s: f64,
}

pub const CELL_META: &str = "cell.json";

pub fn seed_dir(cell: &Path, seed: u64) -> PathBuf {
    cell.join(format!("seed-{seed}"))
}
