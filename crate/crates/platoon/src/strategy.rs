use std::fmt;
use std::str::FromStr;

use sao_core::{ParameterSetting, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{name}` = {value} is out of range")]
    OutOfRange { name: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    BestDistance,
    BestVelocity,
    BestDistanceAndLane,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::BestDistance,
        StrategyKind::BestVelocity,
        StrategyKind::BestDistanceAndLane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::BestDistance => "BestDistance",
            StrategyKind::BestVelocity => "BestVelocity",
            StrategyKind::BestDistanceAndLane => "BestDistanceAndLane",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_string()))
    }
}

/// Tunable coordination parameters. Speeds in km/h, distances in meters, durations in seconds.
/// Each strategy reads only the fields that apply to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    pub advertising_duration: f64,
    pub search_distance_front: f64,
    pub search_distance_back: f64,
    pub max_speed_difference: f64,
    pub speed_threshold_lane2: f64,
    pub speed_threshold_lane3: f64,
    pub speed_threshold_lane4: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            advertising_duration: 10.0,
            search_distance_front: 600.0,
            search_distance_back: 250.0,
            max_speed_difference: 35.0,
            speed_threshold_lane2: 100.0,
            speed_threshold_lane3: 130.0,
            speed_threshold_lane4: 160.0,
        }
    }
}

impl StrategyParams {
    pub const NAMES: [&'static str; 7] = [
        "advertising_duration",
        "search_distance_front",
        "search_distance_back",
        "max_speed_difference",
        "speed_threshold_lane2",
        "speed_threshold_lane3",
        "speed_threshold_lane4",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "advertising_duration" => &mut self.advertising_duration,
            "search_distance_front" => &mut self.search_distance_front,
            "search_distance_back" => &mut self.search_distance_back,
            "max_speed_difference" => &mut self.max_speed_difference,
            "speed_threshold_lane2" => &mut self.speed_threshold_lane2,
            "speed_threshold_lane3" => &mut self.speed_threshold_lane3,
            "speed_threshold_lane4" => &mut self.speed_threshold_lane4,
            _ => return None,
        })
    }

    /// Defaults overridden by every parameter in `setting`.
    pub fn from_setting(setting: &ParameterSetting) -> Result<Self, StrategyError> {
        let mut p = Self::default();
        for (name, v) in setting.iter() {
            let v = v.as_f64();
            if !(v.is_finite() && v >= 0.0) {
                return Err(StrategyError::OutOfRange {
                    name: name.clone(),
                    value: v,
                });
            }
            *p.slot(name)
                .ok_or_else(|| StrategyError::UnknownParameter(name.clone()))? = v;
        }
        Ok(p)
    }

    /// Lane 1 through 4 for a platoon cruising at `speed`: the highest lane whose threshold is met.
    pub fn lane_for(&self, speed: f64, lanes: u8) -> u8 {
        let thresholds = [
            self.speed_threshold_lane2,
            self.speed_threshold_lane3,
            self.speed_threshold_lane4,
        ];
        let mut lane = 1;
        for (i, t) in thresholds.iter().enumerate() {
            if speed >= *t {
                lane = i as u8 + 2;
            }
        }
        lane.min(lanes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub params: StrategyParams,
}

impl StrategyConfig {
    pub fn new(strategy: &str, setting: &ParameterSetting) -> Result<Self, StrategyError> {
        Ok(Self {
            kind: strategy.parse()?,
            params: StrategyParams::from_setting(setting)?,
        })
    }

    /// The Best-Velocity column of the baseline table.
    pub fn best_velocity() -> Self {
        Self {
            kind: StrategyKind::BestVelocity,
            params: StrategyParams::default(),
        }
    }

    /// The Best-Distance column of the baseline table.
    pub fn best_distance() -> Self {
        Self {
            kind: StrategyKind::BestDistance,
            params: StrategyParams::default(),
        }
    }
}

/// Parameter setting holding the given fields, handy for building decisions by hand.
pub fn setting(pairs: &[(&str, f64)]) -> ParameterSetting {
    pairs
        .iter()
        .fold(ParameterSetting::new(), |s, (k, v)| s.with(k, Value::Double(*v)))
}
