//! Declarative condition/action rule files, shared by situation rules and fallback rules.
//!
//! ```yaml
//! rules:
//!   - when:
//!       - { field: vehicles, op: "<=", value: 120 }
//!     then: { situation: 0 }
//! default: { situation: -1 }
//! ```
//!
//! Rules are evaluated in order and the first one whose conditions all hold wins.

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddm::{ContextFieldSpec, DomainDataModel};
use crate::value::{AdaptationDecision, ParameterSetting, ValueMap};
use crate::SituationId;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("cannot read rule file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed rule file: {0}")]
    Syntax(String),
    #[error("rule {rule}: unknown context field `{field}`")]
    UnknownField { rule: String, field: String },
    #[error("context has no value for field `{0}`")]
    MissingContext(String),
    #[error("rule {rule}: {reason}")]
    BadAction { rule: String, reason: String },
    #[error("fallback rules require a `default` entry")]
    MissingDefault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl Op {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Op::Lt => lhs < rhs,
            Op::Le => lhs <= rhs,
            Op::Gt => lhs > rhs,
            Op::Ge => lhs >= rhs,
            Op::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub field: String,
    pub op: Op,
    pub value: f64,
}

impl Condition {
    pub fn new(field: &str, op: Op, value: f64) -> Self {
        Self {
            field: field.to_string(),
            op,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule<A> {
    #[serde(default)]
    pub when: Vec<Condition>,
    pub then: A,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSet<A> {
    #[serde(default = "Vec::new")]
    pub rules: Vec<Rule<A>>,
    #[serde(default = "Option::default")]
    pub default: Option<A>,
}

impl<A> RuleSet<A> {
    pub fn new(rules: Vec<Rule<A>>, default: Option<A>) -> Self {
        Self { rules, default }
    }

    /// Action of the first rule whose conditions all hold, else the default.
    pub fn evaluate(&self, context: &ValueMap) -> Result<Option<&A>, RuleError> {
        for rule in &self.rules {
            let mut all = true;
            for c in &rule.when {
                let v = context
                    .get(&c.field)
                    .ok_or_else(|| RuleError::MissingContext(c.field.clone()))?;
                if !c.op.holds(v.as_f64(), c.value) {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(Some(&rule.then));
            }
        }
        Ok(self.default.as_ref())
    }

    /// Checks that every referenced field is a declared context field.
    pub fn check_fields(&self, declared: &IndexMap<String, ContextFieldSpec>) -> Result<(), RuleError> {
        for (i, rule) in self.rules.iter().enumerate() {
            for c in &rule.when {
                if !declared.contains_key(&c.field) {
                    return Err(RuleError::UnknownField {
                        rule: format!("rules[{i}]"),
                        field: c.field.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl<A: for<'de> Deserialize<'de>> RuleSet<A> {
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        serde_yaml::from_str(text).map_err(|e| RuleError::Syntax(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RuleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SituationAction {
    pub situation: SituationId,
}

pub type SituationRuleSet = RuleSet<SituationAction>;

impl SituationRuleSet {
    pub fn validate(&self, ddm: &DomainDataModel) -> Result<(), RuleError> {
        self.check_fields(&ddm.context.data)?;
        let all = self.rules.iter().map(|r| &r.then).chain(self.default.as_ref());
        for (i, a) in all.enumerate() {
            if a.situation < -1 {
                return Err(RuleError::BadAction {
                    rule: format!("rules[{i}]"),
                    reason: format!("situation {} is below -1", a.situation),
                });
            }
        }
        Ok(())
    }
}

/// Situation of the first matching rule; −1 when nothing matches and no default is given.
pub fn rule_based_detect(rules: &SituationRuleSet, context: &ValueMap) -> Result<SituationId, RuleError> {
    Ok(rules.evaluate(context)?.map_or(-1, |a| a.situation))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallbackAction {
    pub strategy: String,
    #[serde(default)]
    pub parameters: ParameterSetting,
}

impl From<&FallbackAction> for AdaptationDecision {
    fn from(a: &FallbackAction) -> Self {
        AdaptationDecision::new(&a.strategy, a.parameters.clone())
    }
}

pub type FallbackRuleSet = RuleSet<FallbackAction>;

impl FallbackRuleSet {
    /// Checks fields, default presence, and that every action is a valid decision for the DDM.
    pub fn validate(&self, ddm: &DomainDataModel) -> Result<(), RuleError> {
        self.check_fields(&ddm.context.data)?;
        if self.default.is_none() {
            return Err(RuleError::MissingDefault);
        }
        let labelled = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("rules[{i}]"), &r.then))
            .chain(self.default.iter().map(|d| ("default".to_string(), d)));
        for (label, action) in labelled {
            check_decision(ddm, &action.strategy, &action.parameters)
                .map_err(|reason| RuleError::BadAction { rule: label, reason })?;
        }
        Ok(())
    }
}

/// Verifies a (strategy, setting) pair against the DDM: known strategy, exactly the applicable
/// parameters, values in bounds and integral where required.
pub fn check_decision(ddm: &DomainDataModel, strategy: &str, parameters: &ParameterSetting) -> Result<(), String> {
    let specs = ddm.parameters_for_strategy(strategy).map_err(|e| e.to_string())?;
    let expected: HashSet<&str> = specs.iter().map(|p| p.name.as_str()).collect();
    for (k, _) in parameters.iter() {
        if !expected.contains(k.as_str()) {
            return Err(format!("parameter `{k}` does not apply to {strategy}"));
        }
    }
    for spec in specs {
        let v = parameters
            .get(&spec.name)
            .ok_or_else(|| format!("parameter `{}` missing for {strategy}", spec.name))?;
        let v = v
            .coerce(spec.data_type)
            .ok_or_else(|| format!("parameter `{}` must be {}", spec.name, spec.data_type.name()))?;
        if !spec.contains(v) {
            return Err(format!(
                "parameter `{}` = {v} outside [{}, {}]",
                spec.name, spec.min, spec.max
            ));
        }
    }
    Ok(())
}

/// First matching fallback decision; the default guarantees one exists after validation.
pub fn apply_fallback(rules: &FallbackRuleSet, context: &ValueMap) -> Result<AdaptationDecision, RuleError> {
    rules
        .evaluate(context)?
        .map(AdaptationDecision::from)
        .ok_or(RuleError::MissingDefault)
}
