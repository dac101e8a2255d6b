//! Bridge between the framework and a managed system: data preprocessing, the adaptation
//! executor, the REST service and client, and the closed-loop harness that wires them up.

pub mod client;
pub mod executor;
pub mod harness;
pub mod preprocess;
pub mod service;
pub mod wire;

pub use client::{AdapterClient, ClientError};
pub use executor::execute;
pub use harness::{
    run_baseline, run_http, run_in_process, run_loop, Baseline, HarnessError, Planner, RemotePlanner, RunOutput,
};
pub use preprocess::{PreprocessError, Preprocessor};
pub use service::{Server, ServiceError, Snapshot};
pub use wire::{Ack, AdaptationResponse, Health, WireObservation};
