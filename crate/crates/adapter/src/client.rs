//! Blocking client for the adapter service, used by a managed system running out of process.

use std::net::SocketAddr;

use sao_core::Observation;
use thiserror::Error;

use crate::wire::{Ack, AdaptationResponse, Health};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("observation rejected ({status}): {}", .errors.join("; "))]
    Rejected { status: u16, errors: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct AdapterClient {
    base: String,
    http: reqwest::blocking::Client,
}

impl AdapterClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::blocking::Client::new(),
        }
    }

    pub fn local(addr: SocketAddr) -> Self {
        Self::new(format!("http://{addr}"))
    }

    /// Posts one observation. Returns once the coordination loop has processed it.
    pub fn post_observation(&self, obs: &Observation) -> Result<Ack, ClientError> {
        let response = self.http.post(format!("{}/observations", self.base)).json(obs).send()?;
        let status = response.status();
        let ack: Ack = response.json()?;
        if status.is_success() && ack.accepted {
            Ok(ack)
        } else {
            Err(ClientError::Rejected {
                status: status.as_u16(),
                errors: ack.errors,
            })
        }
    }

    /// Posts a raw body, for exercising the service's error paths.
    pub fn post_raw(&self, body: &str) -> Result<(u16, Ack), ClientError> {
        let response = self
            .http
            .post(format!("{}/observations", self.base))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()?;
        let status = response.status().as_u16();
        Ok((status, response.json()?))
    }

    pub fn adaptation(&self) -> Result<AdaptationResponse, ClientError> {
        Ok(self
            .http
            .get(format!("{}/adaptations", self.base))
            .send()?
            .error_for_status()?
            .json()?)
    }

    pub fn health(&self) -> Result<Health, ClientError> {
        Ok(self
            .http
            .get(format!("{}/health", self.base))
            .send()?
            .error_for_status()?
            .json()?)
    }
}
