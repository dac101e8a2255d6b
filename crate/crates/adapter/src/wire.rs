//! JSON payloads of the HTTP surface. Field names are the DDM-declared names.

use sao_core::{AdaptationDecision, Observation, ParameterSetting};
use serde::{Deserialize, Serialize};

/// Body of `POST /observations`: an observation exactly as the store keeps it.
pub type WireObservation = Observation;

/// Response to `POST /observations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: bool,
    pub errors: Vec<String>,
}

impl Ack {
    pub fn accepted() -> Self {
        Self {
            accepted: true,
            errors: Vec::new(),
        }
    }

    pub fn rejected(errors: Vec<String>) -> Self {
        Self {
            accepted: false,
            errors,
        }
    }
}

/// Response to `GET /adaptations`. `seq` counts decisions emitted so far; 0 means the payload is
/// the initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationResponse {
    pub seq: u64,
    pub strategy: String,
    pub parameters: ParameterSetting,
}

impl AdaptationResponse {
    pub fn decision(&self) -> AdaptationDecision {
        AdaptationDecision::new(&self.strategy, self.parameters.clone())
    }
}

/// Response to `GET /health`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub observations: usize,
    pub seq: u64,
}
