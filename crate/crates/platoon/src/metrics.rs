//! Raw per-step monitoring data and its reduction to the four normalized platoon metrics.

use serde::{Deserialize, Serialize};

/// One vehicle that left the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vehicle: u64,
    pub capable: bool,
    pub spawn_time: f64,
    pub exit_time: f64,
    /// Travel time at the vehicle's desired speed on an empty road.
    pub free_flow_time: f64,
    pub platoon_time: f64,
}

impl TripRecord {
    pub fn travel_time(&self) -> f64 {
        self.exit_time - self.spawn_time
    }
}

/// What the simulator reports after each step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawMonitoringRecord {
    pub timestamp: f64,
    pub dt: f64,
    pub vehicles_on_road: usize,
    pub cars_on_road: usize,
    /// Sum of car speeds in km/h.
    pub car_speed_sum: f64,
    pub capable_on_road: usize,
    pub capable_in_platoon: usize,
    /// Vehicles whose free-flow exit time fell inside this step.
    pub expected_exits: usize,
    pub trips: Vec<TripRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsWindow {
    pub throughput: f64,
    pub time_loss: f64,
    pub platoon_utilization: f64,
    pub platoon_time: f64,
}

impl Default for MetricsWindow {
    /// Values carried into the first window when it has nothing to measure: an empty road loses
    /// no time and has no platoons.
    fn default() -> Self {
        Self {
            throughput: 1.0,
            time_loss: 1.0,
            platoon_utilization: 0.0,
            platoon_time: 0.0,
        }
    }
}

impl MetricsWindow {
    pub const NAMES: [&'static str; 4] = ["throughput", "time_loss", "platoon_utilization", "platoon_time"];

    pub fn values(&self) -> [f64; 4] {
        [
            self.throughput,
            self.time_loss,
            self.platoon_utilization,
            self.platoon_time,
        ]
    }

    /// Reduces a window of records. Each metric without a defined value in this window keeps the
    /// value from `previous`.
    pub fn aggregate(records: &[RawMonitoringRecord], previous: &MetricsWindow) -> MetricsWindow {
        let trips: Vec<&TripRecord> = records.iter().flat_map(|r| &r.trips).collect();
        let expected: usize = records.iter().map(|r| r.expected_exits).sum();

        let throughput = if expected > 0 {
            trips.len() as f64 / expected as f64
        } else if !trips.is_empty() {
            1.0
        } else {
            previous.throughput
        };

        let time_loss = if trips.is_empty() {
            previous.time_loss
        } else {
            let delay = trips
                .iter()
                .map(|t| (t.travel_time() - t.free_flow_time) / t.free_flow_time)
                .sum::<f64>()
                / trips.len() as f64;
            1.0 - delay
        };

        let capable_time: f64 = records.iter().map(|r| r.capable_on_road as f64 * r.dt).sum();
        let platoon_utilization = if capable_time > 0.0 {
            records.iter().map(|r| r.capable_in_platoon as f64 * r.dt).sum::<f64>() / capable_time
        } else {
            previous.platoon_utilization
        };

        let capable: Vec<&&TripRecord> = trips.iter().filter(|t| t.capable).collect();
        let platoon_time = if capable.is_empty() {
            previous.platoon_time
        } else {
            capable.iter().map(|t| t.platoon_time / t.travel_time()).sum::<f64>() / capable.len() as f64
        };

        MetricsWindow {
            throughput: clamp01(throughput),
            time_loss: clamp01(time_loss),
            platoon_utilization: clamp01(platoon_utilization),
            platoon_time: clamp01(platoon_time),
        }
    }
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Context readings over a window: vehicle count at the window's end and the time-averaged car
/// speed (0 when no car was on the road).
pub fn context_of(records: &[RawMonitoringRecord]) -> (usize, f64) {
    let vehicles = records.last().map_or(0, |r| r.vehicles_on_road);
    let cars: usize = records.iter().map(|r| r.cars_on_road).sum();
    let speed = if cars > 0 {
        records.iter().map(|r| r.car_speed_sum).sum::<f64>() / cars as f64
    } else {
        0.0
    };
    (vehicles, speed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(capable: usize, in_platoon: usize) -> RawMonitoringRecord {
        RawMonitoringRecord {
            dt: 0.5,
            capable_on_road: capable,
            capable_in_platoon: in_platoon,
            ..Default::default()
        }
    }

    #[test]
    fn utilization_is_time_weighted_ratio() {
        let m = MetricsWindow::aggregate(&[rec(100, 70), rec(100, 70)], &MetricsWindow::default());
        assert!((m.platoon_utilization - 0.7).abs() < 1e-12);
        let full = MetricsWindow::aggregate(&[rec(10, 10)], &MetricsWindow::default());
        assert_eq!(full.platoon_utilization, 1.0);
    }

    #[test]
    fn empty_window_carries_previous() {
        let prev = MetricsWindow {
            throughput: 0.4,
            time_loss: 0.8,
            platoon_utilization: 0.3,
            platoon_time: 0.2,
        };
        assert_eq!(MetricsWindow::aggregate(&[rec(0, 0)], &prev), prev);
    }

    #[test]
    fn missing_exits_give_zero_throughput() {
        let mut r = rec(4, 2);
        r.expected_exits = 3;
        let m = MetricsWindow::aggregate(&[r], &MetricsWindow::default());
        assert_eq!(m.throughput, 0.0);
        assert_eq!(m.platoon_utilization, 0.5);
    }

    #[test]
    fn trip_metrics() {
        let trip = |capable, travel: f64, platoon| TripRecord {
            vehicle: 0,
            capable,
            spawn_time: 0.0,
            exit_time: travel,
            free_flow_time: 300.0,
            platoon_time: platoon,
        };
        let mut r = rec(1, 0);
        r.expected_exits = 2;
        r.trips = vec![trip(true, 330.0, 165.0), trip(false, 300.0, 0.0)];
        let m = MetricsWindow::aggregate(&[r], &MetricsWindow::default());
        assert_eq!(m.throughput, 1.0);
        assert!((m.time_loss - 0.95).abs() < 1e-12);
        assert!((m.platoon_time - 0.5).abs() < 1e-12);
    }
}
