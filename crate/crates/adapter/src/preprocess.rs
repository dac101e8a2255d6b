//! Raw monitoring data to DDM-shaped observations.

use sao_core::{AdaptationDecision, Observation, Value, ValueMap};
use sao_platoon::{context_of, MetricsWindow, RawMonitoringRecord};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("window of {window} s ending at {end} s holds no monitoring records")]
    EmptyWindow { window: f64, end: f64 },
}

/// Context field names the platoon DDM declares.
pub const VEHICLES: &str = "vehicles";
pub const AVG_CAR_SPEED: &str = "avg_car_speed";

/// Turns windows of simulator records into observations. Metrics a window cannot measure are
/// carried over from the previous window, so the preprocessor is stateful.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    previous: MetricsWindow,
}

impl Preprocessor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn previous(&self) -> &MetricsWindow {
        &self.previous
    }

    /// Aggregates the records of the last `window` seconds (ending at the newest record) into one
    /// observation stamped with the window's end. `input` is the configuration that was active.
    pub fn preprocess(
        &mut self,
        raw: &[RawMonitoringRecord],
        window: f64,
        input: &AdaptationDecision,
    ) -> Result<Observation, PreprocessError> {
        let end = raw.last().map_or(0.0, |r| r.timestamp);
        let start = end - window;
        let first = raw.partition_point(|r| r.timestamp <= start);
        let records = &raw[first..];
        if records.is_empty() || window <= 0.0 {
            return Err(PreprocessError::EmptyWindow { window, end });
        }

        let metrics = MetricsWindow::aggregate(records, &self.previous);
        self.previous = metrics;
        let (vehicles, speed) = context_of(records);

        let mut context = ValueMap::new();
        context.insert(VEHICLES.into(), Value::Int(vehicles as i64));
        context.insert(AVG_CAR_SPEED.into(), Value::Double(speed));
        let metrics = MetricsWindow::NAMES
            .iter()
            .zip(metrics.values())
            .map(|(k, v)| (k.to_string(), Value::Double(v)))
            .collect();
        Ok(Observation {
            timestamp: end,
            context,
            input: input.clone(),
            metrics,
        })
    }
}
