//! Situation detection: maps accumulated context observations to situation ids.
//!
//! The detector keeps its own copy of every context it has seen, re-clusters the whole history on
//! each new observation, and renames the fresh clusters so ids stay stable between rounds.

pub mod dbscan;
pub mod kmeans;
pub mod labels;
pub mod optics;

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::ddm::{DetectionAlgorithm, DomainDataModel};
use crate::rules::{rule_based_detect, RuleError, SituationRuleSet};
use crate::value::ValueMap;
use crate::SituationId;

pub use dbscan::dbscan;
pub use kmeans::{gap_statistic, kmeans, GapResult, KMeansFit};
pub use labels::{stabilize_labels, stabilize_labels_from, ClusteringOutcome};
pub use optics::{optics, optics_ordering, xi_clusters, xi_labels, OpticsOrdering};

#[derive(Debug, Error)]
pub enum SitdetError {
    #[error("situation detection requires setting `{0}`")]
    ConfigMissing(&'static str),
    #[error("no points to cluster")]
    EmptyInput,
    #[error("k = {k} exceeds the {n} available points")]
    KExceedsPoints { k: usize, n: usize },
    #[error("previous labels ({previous}) outnumber fresh labels ({fresh})")]
    LengthMismatch { previous: usize, fresh: usize },
    #[error("context has no value for `{0}`")]
    UnknownField(String),
    #[error(transparent)]
    Rules(#[from] RuleError),
}

/// Which detector runs, with its resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    RuleBased(SituationRuleSet),
    KMeans {
        k_min: usize,
        k_max: usize,
    },
    Dbscan {
        eps: f64,
        min_samples: usize,
    },
    Optics {
        min_samples: usize,
        min_cluster_size: usize,
        xi: f64,
    },
}

impl Detector {
    /// Resolves the DDM's detection settings; rule files are read relative to `base_dir`.
    pub fn from_ddm(ddm: &DomainDataModel, base_dir: &Path) -> Result<Self, SitdetError> {
        let det = ddm.detection();
        let count = |key: &'static str| -> Result<usize, SitdetError> {
            det.number(key)
                .map(|v| v as usize)
                .ok_or(SitdetError::ConfigMissing(key))
        };
        Ok(match det.algorithm {
            DetectionAlgorithm::RuleBased => {
                let path = det.text("rules").ok_or(SitdetError::ConfigMissing("rules"))?;
                let rules = SituationRuleSet::load(DomainDataModel::resolve_path(base_dir, path))?;
                rules.validate(ddm)?;
                Detector::RuleBased(rules)
            }
            DetectionAlgorithm::KMeans => match det.number("k") {
                Some(k) => Detector::KMeans {
                    k_min: k as usize,
                    k_max: k as usize,
                },
                None => Detector::KMeans {
                    k_min: count("k_min")?,
                    k_max: count("k_max")?,
                },
            },
            DetectionAlgorithm::Dbscan => Detector::Dbscan {
                eps: det.number("eps").ok_or(SitdetError::ConfigMissing("eps"))?,
                min_samples: count("min_samples")?,
            },
            DetectionAlgorithm::Optics => Detector::Optics {
                min_samples: count("min_samples")?,
                min_cluster_size: count("min_cluster_size")?,
                xi: det.number("xi").unwrap_or(optics::DEFAULT_XI),
            },
        })
    }

    /// Observations needed before clustering is attempted.
    pub fn min_history(&self) -> usize {
        match self {
            Detector::RuleBased(_) => 1,
            Detector::KMeans { k_max, .. } => (2 * k_max).max(10),
            Detector::Dbscan { min_samples, .. } | Detector::Optics { min_samples, .. } => (*min_samples).max(10),
        }
    }
}

pub struct SituationDetector {
    detector: Detector,
    features: Vec<String>,
    seed: u64,
    history: Vec<Vec<f64>>,
    labels: Vec<SituationId>,
    next_id: SituationId,
    last_mapping: BTreeMap<SituationId, SituationId>,
}

impl SituationDetector {
    pub fn new(detector: Detector, features: Vec<String>, seed: u64) -> Self {
        Self {
            detector,
            features,
            seed,
            history: Vec::new(),
            labels: Vec::new(),
            next_id: 0,
            last_mapping: BTreeMap::new(),
        }
    }

    pub fn from_ddm(ddm: &DomainDataModel, base_dir: &Path) -> Result<Self, SitdetError> {
        let det = ddm.detection();
        let features = match det.text("features") {
            Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
            None => ddm.context.data.keys().cloned().collect(),
        };
        let seed = det.number("seed").map_or(0, |s| s as u64);
        Ok(Self::new(Detector::from_ddm(ddm, base_dir)?, features, seed))
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    /// Stabilized labels for every observation seen so far.
    pub fn labels(&self) -> &[SituationId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Renaming applied to the most recent fresh clustering.
    pub fn last_mapping(&self) -> &BTreeMap<SituationId, SituationId> {
        &self.last_mapping
    }

    /// Appends the context and returns its situation. History and labels stay aligned even when
    /// clustering fails; the new observation is then labeled noise.
    pub fn detect(&mut self, context: &ValueMap) -> Result<SituationId, SitdetError> {
        if let Detector::RuleBased(rules) = &self.detector {
            let s = rule_based_detect(rules, context);
            let label = *s.as_ref().unwrap_or(&-1);
            self.history.push(Vec::new());
            self.labels.push(label);
            return s.map_err(Into::into);
        }
        let x = self
            .features
            .iter()
            .map(|f| {
                context
                    .get(f)
                    .map(|v| v.as_f64())
                    .ok_or_else(|| SitdetError::UnknownField(f.clone()))
            })
            .collect::<Result<Vec<_>, _>>();
        let x = match x {
            Ok(x) => x,
            Err(e) => {
                self.history.push(vec![f64::NAN; self.features.len()]);
                self.labels.push(-1);
                return Err(e);
            }
        };
        self.history.push(x);
        if self.history.len() < self.detector.min_history() {
            self.labels.push(-1);
            return Ok(-1);
        }
        match self.recluster() {
            Ok(s) => Ok(s),
            Err(e) => {
                self.labels.push(-1);
                Err(e)
            }
        }
    }

    fn recluster(&mut self) -> Result<SituationId, SitdetError> {
        let points = standardize(&self.history);
        let fresh = match &self.detector {
            Detector::RuleBased(_) => unreachable!("rule-based detection does not cluster"),
            Detector::KMeans { k_min, k_max } => {
                let k = if k_min == k_max {
                    *k_min
                } else {
                    gap_statistic(&points, *k_min, *k_max, kmeans::GAP_REFERENCES, self.seed)?.k
                };
                kmeans(&points, k, self.seed)?
                    .labels
                    .into_iter()
                    .map(|l| l as SituationId)
                    .collect()
            }
            Detector::Dbscan { eps, min_samples } => dbscan(&points, *eps, *min_samples)?,
            Detector::Optics {
                min_samples,
                min_cluster_size,
                xi,
            } => optics(&points, *min_samples, *min_cluster_size, *xi)?,
        };
        let out = stabilize_labels_from(&self.labels, &fresh, self.next_id)?;
        if let Some(&m) = out.labels.iter().max() {
            self.next_id = self.next_id.max(m + 1);
        }
        self.labels = out.labels;
        self.last_mapping = out.id_mapping;
        Ok(*self.labels.last().expect("history is nonempty"))
    }
}

/// Per-dimension z-scores. Constant dimensions are only centered.
pub fn standardize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let dim = points.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for p in points {
        for d in 0..dim {
            mean[d] += p[d] / n;
        }
    }
    let mut sd = vec![0.0; dim];
    for p in points {
        for d in 0..dim {
            sd[d] += (p[d] - mean[d]).powi(2) / n;
        }
    }
    let sd: Vec<f64> = sd.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    points
        .iter()
        .map(|p| (0..dim).map(|d| (p[d] - mean[d]) / sd[d]).collect())
        .collect()
}
