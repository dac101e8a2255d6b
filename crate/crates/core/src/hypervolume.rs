//! Single-point hypervolume: the volume dominated by one observation relative to the reference
//! point, i.e. the product of the oriented gaps between each measure and its reference value.

use indexmap::IndexMap;
use thiserror::Error;

use crate::ddm::PerformanceMeasureSpec;
use crate::scalar::Scalar;
use crate::value::ValueMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypervolumeError {
    #[error("metric keys do not match the declared performance measures: {0}")]
    KeyMismatch(String),
    #[error("metric `{0}` is not finite")]
    NonFiniteValue(String),
}

/// Oriented gap `v - r` (higher is better) or `r - v` (lower is better).
#[inline]
pub fn oriented_gap<T: Scalar>(value: T, reference: T, higher_is_better: bool) -> T {
    if higher_is_better {
        value - reference
    } else {
        reference - value
    }
}

/// Product of the oriented gaps, or zero as soon as any gap is not positive.
pub fn hypervolume_of<T: Scalar>(points: impl IntoIterator<Item = (T, T, bool)>) -> T {
    let mut hv = T::one();
    for (v, r, hib) in points {
        let g = oriented_gap(v, r, hib);
        if !(g > T::zero()) {
            return T::zero();
        }
        hv = hv * g;
    }
    hv
}

pub fn compute_hypervolume(
    metrics: &ValueMap,
    specs: &IndexMap<String, PerformanceMeasureSpec>,
) -> Result<f64, HypervolumeError> {
    if metrics.len() != specs.len() {
        return Err(HypervolumeError::KeyMismatch(format!(
            "expected {} measures, got {}",
            specs.len(),
            metrics.len()
        )));
    }
    let mut terms = Vec::with_capacity(specs.len());
    for (name, spec) in specs {
        let v = metrics
            .get(name)
            .ok_or_else(|| HypervolumeError::KeyMismatch(format!("missing `{name}`")))?;
        if !v.is_finite() {
            return Err(HypervolumeError::NonFiniteValue(name.clone()));
        }
        terms.push((v.as_f64(), spec.reference_value.as_f64(), spec.higher_is_better));
    }
    Ok(hypervolume_of(terms))
}
