//! Strategy selection: keep the active planning strategy or replace it when it keeps violating
//! the performance thresholds.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use thiserror::Error;

use crate::ddm::{PerformanceMeasureSpec, SelectionMethod, StrategySelectionSettings};
use crate::store::EnrichedObservation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StratselError {
    #[error("strategy order is empty")]
    EmptyOrder,
    #[error("threshold for `{0}` is missing")]
    MissingThreshold(String),
    #[error("no strategy has observations in this situation")]
    NoHistory,
    #[error("current strategy `{0}` is not in the strategy order")]
    UnknownStrategy(String),
}

pub struct SelectionContext<'a> {
    pub current_strategy: &'a str,
    /// Optimization attempts done for the current (situation, strategy) pair.
    pub attempts_done: usize,
    /// The last `window_size` observations of the current situation, oldest first.
    pub window: &'a [&'a EnrichedObservation],
    /// Strategies already executed in this situation.
    pub tried: &'a BTreeSet<String>,
    /// Every observation of the current situation, oldest first.
    pub situation_history: &'a [&'a EnrichedObservation],
    pub settings: &'a StrategySelectionSettings,
    pub measures: &'a IndexMap<String, PerformanceMeasureSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionReason {
    BelowMinAttempts,
    UnderfullWindow,
    WithinThresholds,
    NextUntried,
    BestHistorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub strategy: String,
    pub reason: SelectionReason,
    pub violations: usize,
}

impl Selection {
    fn keep(ctx: &SelectionContext<'_>, reason: SelectionReason, violations: usize) -> Self {
        Self {
            strategy: ctx.current_strategy.to_string(),
            reason,
            violations,
        }
    }
}

/// True when the observation is strictly worse than some threshold.
fn violates(
    obs: &EnrichedObservation,
    settings: &StrategySelectionSettings,
    measures: &IndexMap<String, PerformanceMeasureSpec>,
) -> Result<bool, StratselError> {
    match settings.method {
        SelectionMethod::Hypervolume => {
            let t = settings
                .hypervolume_threshold
                .ok_or_else(|| StratselError::MissingThreshold("hypervolume".into()))?;
            Ok(obs.hypervolume < t)
        }
        SelectionMethod::Threshold => {
            for (name, spec) in measures {
                let t = spec
                    .threshold_value
                    .ok_or_else(|| StratselError::MissingThreshold(name.clone()))?
                    .as_f64();
                let v = obs.base.metrics.get(name).map_or(f64::NAN, |v| v.as_f64());
                let worse = if spec.higher_is_better { v < t } else { v > t };
                if worse {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

pub fn count_violations(
    window: &[&EnrichedObservation],
    settings: &StrategySelectionSettings,
    measures: &IndexMap<String, PerformanceMeasureSpec>,
) -> Result<usize, StratselError> {
    let mut n = 0;
    for obs in window {
        if violates(obs, settings, measures)? {
            n += 1;
        }
    }
    Ok(n)
}

/// Strategy with the highest mean hypervolume over its most recent `window_size` observations.
/// Strategies without observations are skipped; ties go to the earlier strategy in `order`.
pub fn best_historical_strategy(
    situation_history: &[&EnrichedObservation],
    window_size: usize,
    order: &[String],
) -> Result<String, StratselError> {
    let mut best: Option<(&String, f64)> = None;
    for strategy in order {
        let recent: Vec<f64> = situation_history
            .iter()
            .rev()
            .filter(|o| &o.base.input.strategy == strategy)
            .take(window_size.max(1))
            .map(|o| o.hypervolume)
            .collect();
        if recent.is_empty() {
            continue;
        }
        let mean = recent.iter().sum::<f64>() / recent.len() as f64;
        if best.is_none_or(|(_, m)| mean > m) {
            best = Some((strategy, mean));
        }
    }
    best.map(|(s, _)| s.clone()).ok_or(StratselError::NoHistory)
}

pub fn select_explained(ctx: &SelectionContext<'_>, order: &[String]) -> Result<Selection, StratselError> {
    if order.is_empty() {
        return Err(StratselError::EmptyOrder);
    }
    if !order.iter().any(|s| s == ctx.current_strategy) {
        return Err(StratselError::UnknownStrategy(ctx.current_strategy.to_string()));
    }
    let settings = ctx.settings;
    if ctx.attempts_done < settings.min_optimization_attempts {
        return Ok(Selection::keep(ctx, SelectionReason::BelowMinAttempts, 0));
    }
    let violations = count_violations(ctx.window, settings, ctx.measures)?;
    if ctx.window.len() < settings.window_size {
        return Ok(Selection::keep(ctx, SelectionReason::UnderfullWindow, violations));
    }
    if violations < settings.threshold_exceeds {
        return Ok(Selection::keep(ctx, SelectionReason::WithinThresholds, violations));
    }
    if let Some(next) = order.iter().find(|s| !ctx.tried.contains(*s)) {
        return Ok(Selection {
            strategy: next.clone(),
            reason: SelectionReason::NextUntried,
            violations,
        });
    }
    let strategy = best_historical_strategy(ctx.situation_history, settings.window_size, order)?;
    Ok(Selection {
        strategy,
        reason: SelectionReason::BestHistorical,
        violations,
    })
}

pub fn select(ctx: &SelectionContext<'_>, order: &[String]) -> Result<String, StratselError> {
    select_explained(ctx, order).map(|s| s.strategy)
}
