//! HTTP surface of the adapter. Ingestion serializes into a single coordination thread that owns
//! the [`Framework`]; retrieval reads an atomically swapped snapshot and never blocks on it.

use std::net::SocketAddr;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;

use arc_swap::ArcSwap;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use sao_core::store::validate_observation;
use sao_core::{AdaptationDecision, DomainDataModel, Framework, Observation, StoreError};
use thiserror::Error;
use tokio::sync::oneshot;

use crate::wire::{Ack, AdaptationResponse, Health};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("async runtime: {0}")]
    Runtime(std::io::Error),
    #[error("server task failed: {0}")]
    Server(String),
    #[error("coordination thread panicked")]
    CoordinationPanicked,
}

/// What `GET /adaptations` and `GET /health` report.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub seq: u64,
    pub decision: AdaptationDecision,
    pub observations: usize,
}

impl Snapshot {
    fn of(framework: &Framework) -> Self {
        let log = framework.decision_log();
        Self {
            seq: log.len() as u64,
            decision: log
                .last()
                .map_or_else(|| framework.initial_decision(), |d| d.decision.clone()),
            observations: framework.store().len(),
        }
    }
}

struct Job {
    observation: Observation,
    reply: oneshot::Sender<Result<(), String>>,
}

#[derive(Clone)]
struct AppState {
    ddm: Arc<DomainDataModel>,
    queue: mpsc::Sender<Job>,
    snapshot: Arc<ArcSwap<Snapshot>>,
}

fn router(state: AppState) -> Router {
    Router::new()
        .route("/observations", post(ingest))
        .route("/adaptations", get(adaptations))
        .route("/health", get(health))
        .with_state(state)
}

async fn ingest(State(state): State<AppState>, body: Bytes) -> (StatusCode, Json<Ack>) {
    let reject = |status: StatusCode, errors: Vec<String>| {
        tracing::warn!(?errors, "observation rejected");
        (status, Json(Ack::rejected(errors)))
    };
    // Parsed straight into the typed form: going through `serde_json::Value` would reorder map
    // keys, and the store keeps parameter order.
    let observation: Observation = match serde_json::from_slice(&body) {
        Ok(o) => o,
        Err(e) if e.is_data() => return reject(StatusCode::UNPROCESSABLE_ENTITY, vec![e.to_string()]),
        Err(e) => return reject(StatusCode::BAD_REQUEST, vec![format!("malformed body: {e}")]),
    };
    if let Err(e) = validate_observation(&state.ddm, &observation) {
        let errors = match e {
            StoreError::SchemaViolation(issues) => issues,
            other => vec![other.to_string()],
        };
        return reject(StatusCode::UNPROCESSABLE_ENTITY, errors);
    }

    let (reply, done) = oneshot::channel();
    if state.queue.send(Job { observation, reply }).is_err() {
        return reject(
            StatusCode::SERVICE_UNAVAILABLE,
            vec!["coordination loop stopped".into()],
        );
    }
    match done.await {
        Ok(Ok(())) => (StatusCode::OK, Json(Ack::accepted())),
        Ok(Err(e)) => reject(StatusCode::UNPROCESSABLE_ENTITY, vec![e]),
        Err(_) => reject(
            StatusCode::SERVICE_UNAVAILABLE,
            vec!["coordination loop stopped".into()],
        ),
    }
}

async fn adaptations(State(state): State<AppState>) -> Json<AdaptationResponse> {
    let s = state.snapshot.load();
    Json(AdaptationResponse {
        seq: s.seq,
        strategy: s.decision.strategy.clone(),
        parameters: s.decision.parameters.clone(),
    })
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let s = state.snapshot.load();
    Json(Health {
        status: "running".into(),
        observations: s.observations,
        seq: s.seq,
    })
}

fn coordinate(mut framework: Framework, jobs: mpsc::Receiver<Job>, snapshot: Arc<ArcSwap<Snapshot>>) -> Framework {
    for job in jobs {
        let result = framework
            .on_observation(job.observation)
            .map(|_| ())
            .map_err(|e| e.to_string());
        snapshot.store(Arc::new(Snapshot::of(&framework)));
        // The client may have hung up; the observation is processed regardless.
        let _ = job.reply.send(result);
    }
    framework
}

/// A running adapter service. Dropping it without [`Server::shutdown`] aborts the server.
pub struct Server {
    addr: SocketAddr,
    runtime: tokio::runtime::Runtime,
    stop: oneshot::Sender<()>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    coordination: JoinHandle<Framework>,
    snapshot: Arc<ArcSwap<Snapshot>>,
}

impl Server {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(framework: Framework, addr: SocketAddr) -> Result<Self, ServiceError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(ServiceError::Runtime)?;
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind(addr))
            .map_err(|source| ServiceError::Bind { addr, source })?;
        let addr = listener
            .local_addr()
            .map_err(|source| ServiceError::Bind { addr, source })?;

        let snapshot = Arc::new(ArcSwap::from_pointee(Snapshot::of(&framework)));
        let ddm = Arc::new(framework.ddm().clone());
        let (queue, jobs) = mpsc::channel();
        let coordination = {
            let snapshot = snapshot.clone();
            std::thread::Builder::new()
                .name("coordination".into())
                .spawn(move || coordinate(framework, jobs, snapshot))
                .map_err(ServiceError::Runtime)?
        };

        let app = router(AppState {
            ddm,
            queue,
            snapshot: snapshot.clone(),
        });
        let (stop, stopped) = oneshot::channel::<()>();
        let server = runtime.spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stopped.await;
                })
                .await
        });
        tracing::info!(%addr, "adapter service listening");
        Ok(Self {
            addr,
            runtime,
            stop,
            server,
            coordination,
            snapshot,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.load_full()
    }

    /// Blocks until the process receives Ctrl-C, then shuts down.
    pub fn run_until_ctrl_c(self) -> Result<Framework, ServiceError> {
        self.runtime
            .block_on(tokio::signal::ctrl_c())
            .map_err(ServiceError::Runtime)?;
        self.shutdown()
    }

    /// Stops accepting requests, drains the queue, and hands back the framework.
    pub fn shutdown(self) -> Result<Framework, ServiceError> {
        let _ = self.stop.send(());
        let served = self.runtime.block_on(self.server);
        // Dropping the runtime drops the router and with it the last queue sender.
        drop(self.runtime);
        match served {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(ServiceError::Server(e.to_string())),
            Err(e) => return Err(ServiceError::Server(e.to_string())),
        }
        self.coordination.join().map_err(|_| ServiceError::CoordinationPanicked)
    }
}
