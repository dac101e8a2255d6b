//! Desk-scale managed system for the self-aware optimization framework: a highway segment where
//! vehicles form platoons under an exchangeable coordination strategy.

pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod strategy;

pub use metrics::{context_of, MetricsWindow, RawMonitoringRecord, TripRecord};
pub use scenario::{ProfileName, Scenario, ScenarioError, SpawnProfile, SpeedDistribution};
pub use sim::{Platoon, Simulator, Vehicle, VehicleKind, VehicleSpec};
pub use strategy::{setting, StrategyConfig, StrategyError, StrategyKind, StrategyParams};
