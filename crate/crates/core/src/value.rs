//! Scalar values exchanged with the managed system, parameter settings and adaptation decisions.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Declared type of a context field, parameter or performance measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Int,
    Double,
}

impl DataType {
    pub fn name(self) -> &'static str {
        match self {
            DataType::Int => "int",
            DataType::Double => "double",
        }
    }
}

/// An `int` or `double` value. Serializes as a bare number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Double(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Double(d) => d,
        }
    }

    pub fn is_finite(self) -> bool {
        match self {
            Value::Int(_) => true,
            Value::Double(d) => d.is_finite(),
        }
    }

    /// Coerces to the declared type. Integral doubles are accepted for `int`.
    pub fn coerce(self, ty: DataType) -> Option<Value> {
        match (ty, self) {
            (DataType::Int, Value::Int(_)) => Some(self),
            (DataType::Int, Value::Double(d)) => {
                if d.is_finite() && d.fract() == 0.0 && d.abs() < 9.0e15 {
                    Some(Value::Int(d as i64))
                } else {
                    None
                }
            }
            (DataType::Double, Value::Int(i)) => Some(Value::Double(i as f64)),
            (DataType::Double, Value::Double(_)) => Some(self),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Double(d) => write!(f, "{d}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Double(v)
    }
}

/// Named values in declaration order.
pub type ValueMap = IndexMap<String, Value>;

/// Values for exactly the parameters that apply to one strategy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterSetting(pub ValueMap);

impl ParameterSetting {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.0.insert(name.to_string(), value.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.0.get(name).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    /// Compact `name=value;name=value` rendering used in CSV exports.
    pub fn compact(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Strategy plus parameter setting pushed back to the managed system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationDecision {
    pub strategy: String,
    pub parameters: ParameterSetting,
}

impl AdaptationDecision {
    pub fn new(strategy: impl Into<String>, parameters: ParameterSetting) -> Self {
        Self {
            strategy: strategy.into(),
            parameters,
        }
    }
}
