use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario syntax: {0}")]
    Syntax(#[from] serde_yaml::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Weekday,
    Weekend,
}

/// Spawn rate over the day: `(hour, vehicles per hour)` breakpoints, linear in between and
/// constant outside the first and last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnProfile {
    pub name: ProfileName,
    pub rates: Vec<(f64, f64)>,
}

impl SpawnProfile {
    /// Vehicles per hour at `t` seconds after the start of the day.
    pub fn rate_at(&self, t: f64) -> f64 {
        let h = t / 3600.0;
        let r = &self.rates;
        if h <= r[0].0 {
            return r[0].1;
        }
        for w in r.windows(2) {
            let ((h0, v0), (h1, v1)) = (w[0], w[1]);
            if h <= h1 {
                return v0 + (v1 - v0) * (h - h0) / (h1 - h0);
            }
        }
        r[r.len() - 1].1
    }

    /// Local maxima of the breakpoint series (plateaus count once).
    pub fn peaks(&self) -> usize {
        let mut v: Vec<f64> = self.rates.iter().map(|p| p.1).collect();
        v.dedup();
        (0..v.len())
            .filter(|&i| {
                let left = i == 0 || v[i - 1] < v[i];
                let right = i + 1 == v.len() || v[i + 1] < v[i];
                left && right && i != 0 && i + 1 != v.len()
            })
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedDistribution {
    pub mean: f64,
    pub sd: f64,
}

fn default_best_distance_window() -> f64 {
    500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration_h: f64,
    pub dt_s: f64,
    pub window_s: f64,
    pub segment_length_m: f64,
    pub lanes: u8,
    pub truck_share: f64,
    pub platooning_share: f64,
    pub car_max_kmh: f64,
    pub truck_max_kmh: f64,
    pub car_desired_kmh: SpeedDistribution,
    pub truck_desired_kmh: SpeedDistribution,
    pub platoon_gap_m: f64,
    /// A member leaves its platoon once the cruise speed falls this far below its own desired
    /// speed.
    pub leave_tolerance_kmh: f64,
    /// Total width of the search window Best-Distance uses, centered on the vehicle.
    #[serde(default = "default_best_distance_window")]
    pub best_distance_window_m: f64,
    pub profile: SpawnProfile,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_yaml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn steps_per_window(&self) -> usize {
        (self.window_s / self.dt_s).round() as usize
    }

    pub fn windows(&self) -> usize {
        (self.duration_h * 3600.0 / self.window_s).round() as usize
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        let positive = [
            self.duration_h,
            self.dt_s,
            self.window_s,
            self.segment_length_m,
            self.car_max_kmh,
            self.truck_max_kmh,
            self.platoon_gap_m,
            self.best_distance_window_m,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("durations, lengths and speed limits must be positive");
        }
        let steps = self.window_s / self.dt_s;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad("window_s must be a multiple of dt_s");
        }
        if self.lanes < 2 {
            return bad("at least two lanes are needed");
        }
        for share in [self.truck_share, self.platooning_share] {
            if !(0.0..=1.0).contains(&share) {
                return bad("shares must lie in [0, 1]");
            }
        }
        if self.leave_tolerance_kmh < 0.0 {
            return bad("leave_tolerance_kmh must be non-negative");
        }
        for d in [self.car_desired_kmh, self.truck_desired_kmh] {
            if !(d.mean > 0.0 && d.sd >= 0.0) {
                return bad("desired speed distributions need a positive mean and sd >= 0");
            }
        }
        let r = &self.profile.rates;
        if r.is_empty() {
            return bad("profile needs at least one rate");
        }
        if r.iter().any(|(h, v)| !h.is_finite() || !(v.is_finite() && *v >= 0.0)) {
            return bad("profile rates must be finite and non-negative");
        }
        if r.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("profile hours must increase");
        }
        Ok(())
    }
}
