//! Domain-Data-Model: the YAML document that declares the use case, its context fields, the tunable
//! strategy parameters and the performance measures.
//!
//! Parsing is strict. Unknown keys are rejected, every required key must be present, and every
//! error carries the dotted key path of the offending entry. Nothing is returned unless the whole
//! document validates.

use std::fmt;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde_yaml::{Mapping, Value as Yaml};
use thiserror::Error;

use crate::value::{DataType, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdmError {
    #[error("document is not valid YAML: {0}")]
    Syntax(String),
    #[error("missing section `{path}`")]
    MissingSection { path: String },
    #[error("missing key `{path}`")]
    MissingKey { path: String },
    #[error("unknown key `{path}`")]
    UnknownKey { path: String },
    #[error("duplicate entry `{path}`")]
    DuplicateKey { path: String },
    #[error("`{path}`: expected {expected}")]
    BadType { path: String, expected: &'static str },
    #[error("`{path}`: `{name}` is not a known situation detection algorithm")]
    UnknownAlgorithm { path: String, name: String },
    #[error("`{path}`: algorithm requires setting `{setting}`")]
    MissingAlgorithmSetting { path: String, setting: &'static str },
    #[error("`{path}`: min {min} must be below max {max}")]
    BadRange { path: String, min: Value, max: Value },
    #[error("`{path}`: strategy `{strategy}` is not in use_case.available_strategies")]
    UnknownStrategyReference { path: String, strategy: String },
    #[error("`{path}`: threshold required by the selected method is missing")]
    MissingThresholdValue { path: String },
    #[error("`{path}`: {reason}")]
    Invalid { path: String, reason: String },
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

impl DdmError {
    /// Key path of the offending entry, if the error refers to one.
    pub fn path(&self) -> Option<&str> {
        match self {
            DdmError::Syntax(_) | DdmError::UnknownStrategy(_) => None,
            DdmError::MissingSection { path }
            | DdmError::MissingKey { path }
            | DdmError::UnknownKey { path }
            | DdmError::DuplicateKey { path }
            | DdmError::BadType { path, .. }
            | DdmError::UnknownAlgorithm { path, .. }
            | DdmError::MissingAlgorithmSetting { path, .. }
            | DdmError::BadRange { path, .. }
            | DdmError::UnknownStrategyReference { path, .. }
            | DdmError::MissingThresholdValue { path }
            | DdmError::Invalid { path, .. } => Some(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionAlgorithm {
    RuleBased,
    KMeans,
    Dbscan,
    Optics,
}

impl DetectionAlgorithm {
    pub const ALL: [DetectionAlgorithm; 4] = [
        DetectionAlgorithm::RuleBased,
        DetectionAlgorithm::KMeans,
        DetectionAlgorithm::Dbscan,
        DetectionAlgorithm::Optics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectionAlgorithm::RuleBased => "RuleBased",
            DetectionAlgorithm::KMeans => "kMeans",
            DetectionAlgorithm::Dbscan => "DBSCAN",
            DetectionAlgorithm::Optics => "OPTICS",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Settings keys accepted for this algorithm. `features` and `seed` are accepted by all.
    fn allowed_settings(self) -> &'static [&'static str] {
        match self {
            DetectionAlgorithm::RuleBased => &["rules", "features", "seed"],
            DetectionAlgorithm::KMeans => &["k", "k_min", "k_max", "references", "features", "seed"],
            DetectionAlgorithm::Dbscan => &["eps", "min_samples", "features", "seed"],
            DetectionAlgorithm::Optics => &["min_samples", "min_cluster_size", "xi", "features", "seed"],
        }
    }
}

impl fmt::Display for DetectionAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMethod {
    Hypervolume,
    Threshold,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Hypervolume => "hypervolume",
            SelectionMethod::Threshold => "threshold",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "hypervolume" => Some(SelectionMethod::Hypervolume),
            "threshold" => Some(SelectionMethod::Threshold),
            _ => None,
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A detector setting: a number or a string (rule file paths, feature lists).
#[derive(Debug, Clone, PartialEq)]
pub enum SettingValue {
    Number(Value),
    Text(String),
}

impl SettingValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            SettingValue::Number(v) => Some(v.as_f64()),
            SettingValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            SettingValue::Text(s) => Some(s),
            SettingValue::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UseCaseSection {
    pub name: String,
    /// Declaration order is the exploration order used by strategy selection.
    pub available_strategies: Vec<String>,
    pub fallback_rules: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextFieldSpec {
    pub data_type: DataType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSettings {
    pub algorithm: DetectionAlgorithm,
    pub settings: IndexMap<String, SettingValue>,
}

impl DetectionSettings {
    pub fn number(&self, key: &str) -> Option<f64> {
        self.settings.get(key).and_then(SettingValue::as_f64)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.settings.get(key).and_then(SettingValue::as_text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextSection {
    pub data: IndexMap<String, ContextFieldSpec>,
    pub situation_detection_settings: DetectionSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterOptionSpec {
    pub name: String,
    pub data_type: DataType,
    pub min: Value,
    pub max: Value,
    /// `None` means the option applies to every strategy.
    pub strategies: Option<Vec<String>>,
}

impl ParameterOptionSpec {
    pub fn applies_to(&self, strategy: &str) -> bool {
        self.strategies
            .as_ref()
            .is_none_or(|list| list.iter().any(|s| s == strategy))
    }

    pub fn contains(&self, v: Value) -> bool {
        let x = v.as_f64();
        x >= self.min.as_f64() && x <= self.max.as_f64()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySelectionSettings {
    pub observations_between_adaptations: usize,
    pub min_optimization_attempts: usize,
    pub window_size: usize,
    pub threshold_exceeds: usize,
    pub method: SelectionMethod,
    pub hypervolume_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSection {
    pub options: IndexMap<String, ParameterOptionSpec>,
    pub strategy_selection_settings: StrategySelectionSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceMeasureSpec {
    pub name: String,
    pub data_type: DataType,
    pub higher_is_better: bool,
    pub reference_value: Value,
    pub threshold_value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataModel {
    pub use_case: UseCaseSection,
    pub context: ContextSection,
    pub parameter_options: ParameterSection,
    pub performance_measures: IndexMap<String, PerformanceMeasureSpec>,
}

impl DomainDataModel {
    pub fn parse(text: &str) -> Result<Self, DdmError> {
        parse_ddm(text)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DdmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DdmError::Syntax(format!("{}: {e}", path.display())))?;
        parse_ddm(&text)
    }

    pub fn strategies(&self) -> &[String] {
        &self.use_case.available_strategies
    }

    pub fn has_strategy(&self, strategy: &str) -> bool {
        self.use_case.available_strategies.iter().any(|s| s == strategy)
    }

    pub fn selection(&self) -> &StrategySelectionSettings {
        &self.parameter_options.strategy_selection_settings
    }

    pub fn detection(&self) -> &DetectionSettings {
        &self.context.situation_detection_settings
    }

    /// Options applicable to `strategy`, in declaration order.
    pub fn parameters_for_strategy(&self, strategy: &str) -> Result<Vec<&ParameterOptionSpec>, DdmError> {
        if !self.has_strategy(strategy) {
            return Err(DdmError::UnknownStrategy(strategy.to_string()));
        }
        Ok(self
            .parameter_options
            .options
            .values()
            .filter(|p| p.applies_to(strategy))
            .collect())
    }

    /// Resolves a path from the document (fallback rules, rule-based detector rules) against the
    /// directory holding the document.
    pub fn resolve_path(base_dir: &Path, p: &str) -> PathBuf {
        let candidate = Path::new(p);
        if candidate.is_absolute() {
            candidate.to_path_buf()
        } else {
            base_dir.join(candidate)
        }
    }

    /// Replaces the detection algorithm and settings, re-running validation.
    pub fn with_detection(
        &self,
        algorithm: DetectionAlgorithm,
        settings: IndexMap<String, SettingValue>,
    ) -> Result<Self, DdmError> {
        let mut next = self.clone();
        next.context.situation_detection_settings = DetectionSettings { algorithm, settings };
        parse_ddm(&next.to_yaml_string())
    }

    /// Replaces the strategy selection trigger method, re-running validation.
    pub fn with_method(&self, method: SelectionMethod) -> Result<Self, DdmError> {
        let mut next = self.clone();
        next.parameter_options.strategy_selection_settings.method = method;
        parse_ddm(&next.to_yaml_string())
    }

    pub fn to_yaml(&self) -> Yaml {
        let mut root = Mapping::new();

        let mut uc = Mapping::new();
        uc.insert(s("name"), s(&self.use_case.name));
        uc.insert(
            s("available_strategies"),
            Yaml::Sequence(self.use_case.available_strategies.iter().map(|x| s(x)).collect()),
        );
        uc.insert(s("fallback_rules"), s(&self.use_case.fallback_rules));
        root.insert(s("use_case"), Yaml::Mapping(uc));

        let mut data = Mapping::new();
        for (name, spec) in &self.context.data {
            let mut m = Mapping::new();
            m.insert(s("data_type"), s(spec.data_type.name()));
            data.insert(s(name), Yaml::Mapping(m));
        }
        let det = &self.context.situation_detection_settings;
        let mut settings = Mapping::new();
        for (k, v) in &det.settings {
            let y = match v {
                SettingValue::Number(n) => num(*n),
                SettingValue::Text(t) => s(t),
            };
            settings.insert(s(k), y);
        }
        let mut sds = Mapping::new();
        sds.insert(s("algorithm"), s(det.algorithm.name()));
        sds.insert(s("settings"), Yaml::Mapping(settings));
        let mut ctx = Mapping::new();
        ctx.insert(s("data"), Yaml::Mapping(data));
        ctx.insert(s("situation_detection_settings"), Yaml::Mapping(sds));
        root.insert(s("context"), Yaml::Mapping(ctx));

        let mut options = Mapping::new();
        for (name, p) in &self.parameter_options.options {
            let mut m = Mapping::new();
            m.insert(s("data_type"), s(p.data_type.name()));
            m.insert(s("min"), num(p.min));
            m.insert(s("max"), num(p.max));
            if let Some(list) = &p.strategies {
                m.insert(s("strategies"), Yaml::Sequence(list.iter().map(|x| s(x)).collect()));
            }
            options.insert(s(name), Yaml::Mapping(m));
        }
        let sel = &self.parameter_options.strategy_selection_settings;
        let mut ss = Mapping::new();
        ss.insert(
            s("observations_between_adaptations"),
            uint(sel.observations_between_adaptations),
        );
        ss.insert(s("min_optimization_attempts"), uint(sel.min_optimization_attempts));
        ss.insert(s("window_size"), uint(sel.window_size));
        ss.insert(s("threshold_exceeds"), uint(sel.threshold_exceeds));
        ss.insert(s("method"), s(sel.method.name()));
        if let Some(t) = sel.hypervolume_threshold {
            ss.insert(s("hypervolume_threshold"), Yaml::Number(t.into()));
        }
        let mut po = Mapping::new();
        po.insert(s("options"), Yaml::Mapping(options));
        po.insert(s("strategy_selection_settings"), Yaml::Mapping(ss));
        root.insert(s("parameter_options"), Yaml::Mapping(po));

        let mut pm = Mapping::new();
        for (name, spec) in &self.performance_measures {
            let mut m = Mapping::new();
            m.insert(s("data_type"), s(spec.data_type.name()));
            m.insert(s("higher_is_better"), Yaml::Bool(spec.higher_is_better));
            m.insert(s("reference_value"), num(spec.reference_value));
            if let Some(t) = spec.threshold_value {
                m.insert(s("threshold_value"), num(t));
            }
            pm.insert(s(name), Yaml::Mapping(m));
        }
        root.insert(s("performance_measures"), Yaml::Mapping(pm));
        Yaml::Mapping(root)
    }

    pub fn to_yaml_string(&self) -> String {
        serde_yaml::to_string(&self.to_yaml()).expect("mapping serializes")
    }
}

fn s(x: &str) -> Yaml {
    Yaml::String(x.to_string())
}

fn uint(x: usize) -> Yaml {
    Yaml::Number((x as u64).into())
}

fn num(v: Value) -> Yaml {
    match v {
        Value::Int(i) => Yaml::Number(i.into()),
        Value::Double(d) => Yaml::Number(d.into()),
    }
}

/// Parses and validates a Domain-Data-Model document.
pub fn parse_ddm(text: &str) -> Result<DomainDataModel, DdmError> {
    let root: Yaml = serde_yaml::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("duplicate") {
            DdmError::DuplicateKey { path: msg }
        } else {
            DdmError::Syntax(msg)
        }
    })?;
    let root = Node::new(&root, String::new());
    let top = root.mapping()?;
    top.only(&["use_case", "context", "parameter_options", "performance_measures"])?;

    let use_case = parse_use_case(&top.section("use_case")?)?;
    let measures_node = top.section("performance_measures")?;
    let context = parse_context(&top.section("context")?)?;
    let parameter_options = parse_parameters(&top.section("parameter_options")?, &use_case)?;
    let performance_measures = parse_measures(&measures_node)?;

    let sel = &parameter_options.strategy_selection_settings;
    if sel.method == SelectionMethod::Threshold {
        for (name, m) in &performance_measures {
            if m.threshold_value.is_none() {
                return Err(DdmError::MissingThresholdValue {
                    path: format!("performance_measures.{name}.threshold_value"),
                });
            }
        }
    }

    Ok(DomainDataModel {
        use_case,
        context,
        parameter_options,
        performance_measures,
    })
}

fn parse_use_case(node: &MapNode<'_>) -> Result<UseCaseSection, DdmError> {
    node.only(&["name", "available_strategies", "fallback_rules"])?;
    let name = node.required("name")?.string()?;
    let list_node = node.required("available_strategies")?;
    let items = list_node.sequence()?;
    if items.is_empty() {
        return Err(DdmError::Invalid {
            path: list_node.path.clone(),
            reason: "at least one strategy is required".into(),
        });
    }
    let mut available = Vec::with_capacity(items.len());
    for item in items {
        let st = item.string()?;
        if available.contains(&st) {
            return Err(DdmError::DuplicateKey { path: item.path });
        }
        available.push(st);
    }
    let fallback_rules = node.required("fallback_rules")?.string()?;
    Ok(UseCaseSection {
        name,
        available_strategies: available,
        fallback_rules,
    })
}

fn parse_context(node: &MapNode<'_>) -> Result<ContextSection, DdmError> {
    node.only(&["data", "situation_detection_settings"])?;
    let data_node = node.required("data")?.mapping()?;
    if data_node.entries.is_empty() {
        return Err(DdmError::Invalid {
            path: data_node.path.clone(),
            reason: "at least one context field is required".into(),
        });
    }
    let mut data = IndexMap::new();
    for (key, field) in data_node.children()? {
        let field = field.mapping()?;
        field.only(&["data_type"])?;
        let data_type = field.required("data_type")?.data_type()?;
        data.insert(key, ContextFieldSpec { data_type });
    }

    let sds = node.required("situation_detection_settings")?.mapping()?;
    sds.only(&["algorithm", "settings"])?;
    let alg_node = sds.required("algorithm")?;
    let alg_name = alg_node.string()?;
    let algorithm = DetectionAlgorithm::from_name(&alg_name).ok_or_else(|| DdmError::UnknownAlgorithm {
        path: alg_node.path.clone(),
        name: alg_name.clone(),
    })?;
    let mut settings = IndexMap::new();
    let settings_path = format!("{}.settings", sds.path);
    if let Some(set_node) = sds.optional("settings") {
        let set_map = set_node.mapping()?;
        set_map.only(algorithm.allowed_settings())?;
        for (key, v) in set_map.children()? {
            let sv = match v.v {
                Yaml::Number(_) => SettingValue::Number(v.number()?),
                Yaml::String(t) => SettingValue::Text(t.clone()),
                _ => {
                    return Err(DdmError::BadType {
                        path: v.path,
                        expected: "a number or a string",
                    })
                }
            };
            settings.insert(key, sv);
        }
    }
    let det = DetectionSettings { algorithm, settings };
    check_detection_settings(&det, &settings_path, &data)?;
    Ok(ContextSection {
        data,
        situation_detection_settings: det,
    })
}

fn check_detection_settings(
    det: &DetectionSettings,
    path: &str,
    data: &IndexMap<String, ContextFieldSpec>,
) -> Result<(), DdmError> {
    let need_num = |key: &'static str| -> Result<f64, DdmError> {
        match det.settings.get(key) {
            None => Err(DdmError::MissingAlgorithmSetting {
                path: path.to_string(),
                setting: key,
            }),
            Some(SettingValue::Number(v)) => Ok(v.as_f64()),
            Some(SettingValue::Text(_)) => Err(DdmError::BadType {
                path: format!("{path}.{key}"),
                expected: "a number",
            }),
        }
    };
    let positive_int = |key: &'static str, v: f64| -> Result<(), DdmError> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(())
        } else {
            Err(DdmError::BadType {
                path: format!("{path}.{key}"),
                expected: "a positive integer",
            })
        }
    };
    match det.algorithm {
        DetectionAlgorithm::RuleBased => match det.settings.get("rules") {
            None => {
                return Err(DdmError::MissingAlgorithmSetting {
                    path: path.to_string(),
                    setting: "rules",
                })
            }
            Some(SettingValue::Number(_)) => {
                return Err(DdmError::BadType {
                    path: format!("{path}.rules"),
                    expected: "a rule file path",
                })
            }
            Some(SettingValue::Text(_)) => {}
        },
        DetectionAlgorithm::KMeans => {
            if det.settings.contains_key("k") {
                positive_int("k", need_num("k")?)?;
            } else {
                let lo = need_num("k_min")?;
                let hi = need_num("k_max")?;
                positive_int("k_min", lo)?;
                positive_int("k_max", hi)?;
                if lo > hi {
                    return Err(DdmError::BadRange {
                        path: format!("{path}.k_min"),
                        min: Value::Int(lo as i64),
                        max: Value::Int(hi as i64),
                    });
                }
            }
        }
        DetectionAlgorithm::Dbscan => {
            let eps = need_num("eps")?;
            if eps <= 0.0 || !eps.is_finite() {
                return Err(DdmError::Invalid {
                    path: format!("{path}.eps"),
                    reason: "eps must be positive".into(),
                });
            }
            positive_int("min_samples", need_num("min_samples")?)?;
        }
        DetectionAlgorithm::Optics => {
            positive_int("min_samples", need_num("min_samples")?)?;
            positive_int("min_cluster_size", need_num("min_cluster_size")?)?;
            if let Some(xi) = det.number("xi") {
                if !(xi > 0.0 && xi < 1.0) {
                    return Err(DdmError::Invalid {
                        path: format!("{path}.xi"),
                        reason: "xi must lie in (0, 1)".into(),
                    });
                }
            }
        }
    }
    if let Some(v) = det.settings.get("features") {
        let list = v.as_text().ok_or_else(|| DdmError::BadType {
            path: format!("{path}.features"),
            expected: "a comma separated list of context fields",
        })?;
        for f in list.split(',').map(str::trim) {
            if !data.contains_key(f) {
                return Err(DdmError::Invalid {
                    path: format!("{path}.features"),
                    reason: format!("`{f}` is not a declared context field"),
                });
            }
        }
    }
    Ok(())
}

fn parse_parameters(node: &MapNode<'_>, use_case: &UseCaseSection) -> Result<ParameterSection, DdmError> {
    node.only(&["options", "strategy_selection_settings"])?;
    let opts = node.required("options")?.mapping()?;
    let mut options = IndexMap::new();
    for (name, opt) in opts.children()? {
        let opt = opt.mapping()?;
        opt.only(&["data_type", "min", "max", "strategies"])?;
        let data_type = opt.required("data_type")?.data_type()?;
        let min = opt.required("min")?.typed(data_type)?;
        let max = opt.required("max")?.typed(data_type)?;
        if min.as_f64() >= max.as_f64() {
            return Err(DdmError::BadRange {
                path: format!("{}.min", opt.path),
                min,
                max,
            });
        }
        let strategies = match opt.optional("strategies") {
            None => None,
            Some(list_node) => {
                let mut list = Vec::new();
                for item in list_node.sequence()? {
                    let st = item.string()?;
                    if !use_case.available_strategies.contains(&st) {
                        return Err(DdmError::UnknownStrategyReference {
                            path: item.path,
                            strategy: st,
                        });
                    }
                    if list.contains(&st) {
                        return Err(DdmError::DuplicateKey { path: item.path });
                    }
                    list.push(st);
                }
                Some(list)
            }
        };
        options.insert(
            name.clone(),
            ParameterOptionSpec {
                name,
                data_type,
                min,
                max,
                strategies,
            },
        );
    }

    let ss = node.required("strategy_selection_settings")?.mapping()?;
    ss.only(&[
        "observations_between_adaptations",
        "min_optimization_attempts",
        "window_size",
        "threshold_exceeds",
        "method",
        "hypervolume_threshold",
    ])?;
    let observations_between_adaptations = ss.required("observations_between_adaptations")?.count()?;
    let min_optimization_attempts = ss.required("min_optimization_attempts")?.count()?;
    let window_node = ss.required("window_size")?;
    let window_size = window_node.count()?;
    if window_size == 0 {
        return Err(DdmError::Invalid {
            path: window_node.path.clone(),
            reason: "window_size must be at least 1".into(),
        });
    }
    let exceeds_node = ss.required("threshold_exceeds")?;
    let threshold_exceeds = exceeds_node.count()?;
    if threshold_exceeds > window_size {
        return Err(DdmError::Invalid {
            path: exceeds_node.path.clone(),
            reason: format!("threshold_exceeds {threshold_exceeds} exceeds window_size {window_size}"),
        });
    }
    let method_node = ss.required("method")?;
    let method_name = method_node.string()?;
    let method = SelectionMethod::from_name(&method_name).ok_or_else(|| DdmError::Invalid {
        path: method_node.path.clone(),
        reason: format!("`{method_name}` is not one of hypervolume, threshold"),
    })?;
    let hypervolume_threshold = match ss.optional("hypervolume_threshold") {
        Some(n) => Some(n.number()?.as_f64()),
        None => None,
    };
    if method == SelectionMethod::Hypervolume && hypervolume_threshold.is_none() {
        return Err(DdmError::MissingThresholdValue {
            path: format!("{}.hypervolume_threshold", ss.path),
        });
    }
    Ok(ParameterSection {
        options,
        strategy_selection_settings: StrategySelectionSettings {
            observations_between_adaptations,
            min_optimization_attempts,
            window_size,
            threshold_exceeds,
            method,
            hypervolume_threshold,
        },
    })
}

fn parse_measures(node: &MapNode<'_>) -> Result<IndexMap<String, PerformanceMeasureSpec>, DdmError> {
    if node.entries.is_empty() {
        return Err(DdmError::Invalid {
            path: node.path.clone(),
            reason: "at least one performance measure is required".into(),
        });
    }
    let mut out = IndexMap::new();
    for (name, m) in node.children()? {
        let m = m.mapping()?;
        m.only(&["data_type", "higher_is_better", "reference_value", "threshold_value"])?;
        let data_type = m.required("data_type")?.data_type()?;
        let higher_is_better = m.required("higher_is_better")?.boolean()?;
        let reference_value = m.required("reference_value")?.typed(data_type)?;
        let threshold_value = match m.optional("threshold_value") {
            Some(t) => Some(t.typed(data_type)?),
            None => None,
        };
        out.insert(
            name.clone(),
            PerformanceMeasureSpec {
                name,
                data_type,
                higher_is_better,
                reference_value,
                threshold_value,
            },
        );
    }
    Ok(out)
}

struct Node<'a> {
    v: &'a Yaml,
    path: String,
}

struct MapNode<'a> {
    entries: &'a Mapping,
    path: String,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a> Node<'a> {
    fn new(v: &'a Yaml, path: String) -> Self {
        Self { v, path }
    }

    fn bad(&self, expected: &'static str) -> DdmError {
        DdmError::BadType {
            path: self.path.clone(),
            expected,
        }
    }

    fn mapping(&self) -> Result<MapNode<'a>, DdmError> {
        match self.v {
            Yaml::Mapping(m) => Ok(MapNode {
                entries: m,
                path: self.path.clone(),
            }),
            _ => Err(self.bad("a mapping")),
        }
    }

    fn sequence(&self) -> Result<Vec<Node<'a>>, DdmError> {
        match self.v {
            Yaml::Sequence(items) => Ok(items
                .iter()
                .enumerate()
                .map(|(i, v)| Node::new(v, format!("{}[{i}]", self.path)))
                .collect()),
            _ => Err(self.bad("a list")),
        }
    }

    fn string(&self) -> Result<String, DdmError> {
        match self.v {
            Yaml::String(s) => Ok(s.clone()),
            _ => Err(self.bad("a string")),
        }
    }

    fn boolean(&self) -> Result<bool, DdmError> {
        match self.v {
            Yaml::Bool(b) => Ok(*b),
            _ => Err(self.bad("a boolean")),
        }
    }

    fn number(&self) -> Result<Value, DdmError> {
        match self.v {
            Yaml::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Value::Int(i))
                } else if let Some(f) = n.as_f64().filter(|f| f.is_finite()) {
                    Ok(Value::Double(f))
                } else {
                    Err(self.bad("a finite number"))
                }
            }
            _ => Err(self.bad("a number")),
        }
    }

    fn typed(&self, ty: DataType) -> Result<Value, DdmError> {
        let v = self.number()?;
        match ty {
            // int values must be written as integers
            DataType::Int => match v {
                Value::Int(_) => Ok(v),
                Value::Double(_) => Err(self.bad("an integer")),
            },
            DataType::Double => Ok(Value::Double(v.as_f64())),
        }
    }

    fn count(&self) -> Result<usize, DdmError> {
        match self.v {
            Yaml::Number(n) => n
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| self.bad("a non-negative integer")),
            _ => Err(self.bad("a non-negative integer")),
        }
    }

    fn data_type(&self) -> Result<DataType, DdmError> {
        match self.string()?.as_str() {
            "int" => Ok(DataType::Int),
            "double" => Ok(DataType::Double),
            _ => Err(self.bad("`int` or `double`")),
        }
    }
}

impl<'a> MapNode<'a> {
    fn key_of(&self, k: &Yaml) -> Result<String, DdmError> {
        match k {
            Yaml::String(s) => Ok(s.clone()),
            other => Err(DdmError::BadType {
                path: join(&self.path, &format!("{other:?}")),
                expected: "string keys",
            }),
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<(), DdmError> {
        for k in self.entries.keys() {
            let key = self.key_of(k)?;
            if !allowed.contains(&key.as_str()) {
                return Err(DdmError::UnknownKey {
                    path: join(&self.path, &key),
                });
            }
        }
        Ok(())
    }

    fn optional(&self, key: &str) -> Option<Node<'a>> {
        self.entries
            .get(key)
            .filter(|v| !v.is_null())
            .map(|v| Node::new(v, join(&self.path, key)))
    }

    fn required(&self, key: &str) -> Result<Node<'a>, DdmError> {
        self.optional(key).ok_or_else(|| DdmError::MissingKey {
            path: join(&self.path, key),
        })
    }

    fn section(&self, key: &str) -> Result<MapNode<'a>, DdmError> {
        self.optional(key)
            .ok_or_else(|| DdmError::MissingSection {
                path: join(&self.path, key),
            })?
            .mapping()
    }

    fn children(&self) -> Result<Vec<(String, Node<'a>)>, DdmError> {
        self.entries
            .iter()
            .map(|(k, v)| {
                let key = self.key_of(k)?;
                let path = join(&self.path, &key);
                Ok((key, Node::new(v, path)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE_DDM: &str = r#"
use_case:
  name: platooning_coordination
  available_strategies: ["s_1", "s_2"]
  fallback_rules: "Path.To.Rules"
context:
  data:
    # any number of context parameters
    # with unique names
    context1:
      data_type: int
    context2:
      data_type: double
  situation_detection_settings:
    # available algorithms: RuleBased,
    # kMeans, DBSCAN, OPTICS
    algorithm: "DBSCAN"
    settings:
      min_samples: 120
      eps: 34
parameter_options:
  options:
    # any number of context parameters
    # with unique names
    param1:
      data_type: int
      min: 0
      max: 100
    param2:
      data_type: double
      min: 0.0
      max: 2.0
      # optional definition of
      # relevant strategies
      strategies: ["s_1"]
  strategy_selection_settings:
    observations_between_adaptations: 1
    min_optimization_attempts: 5
    window_size: 5
    threshold_exceeds: 3
    # available methods:
    # hypervolume, threshold
    method: "hypervolume"
    hypervolume_threshold: 3.4
performance_measures:
  pm1:
    data_type: int
    higher_is_better: True
    reference_value: -1
  pm2:
    data_type: double
    higher_is_better: False
    reference_value: 100.0
"#;

    #[test]
    fn parameters_for_strategy_respects_restrictions() {
        let m = parse_ddm(REFERENCE_DDM).unwrap();
        let names = |s: &str| -> Vec<String> {
            m.parameters_for_strategy(s)
                .unwrap()
                .into_iter()
                .map(|p| p.name.clone())
                .collect()
        };
        assert_eq!(names("s_1"), ["param1", "param2"]);
        assert_eq!(names("s_2"), ["param1"]);
        assert_eq!(
            m.parameters_for_strategy("s_9").unwrap_err(),
            DdmError::UnknownStrategy("s_9".into())
        );
    }

    #[test]
    fn degenerate_interval_is_bad_range() {
        let text = REFERENCE_DDM.replace("min: 0\n      max: 100", "min: 5\n      max: 5");
        let err = parse_ddm(&text).unwrap_err();
        assert!(matches!(err, DdmError::BadRange { ref path, .. } if path == "parameter_options.options.param1.min"));
    }

    #[test]
    fn missing_performance_measures_section() {
        let cut = REFERENCE_DDM.find("performance_measures:").unwrap();
        let err = parse_ddm(&REFERENCE_DDM[..cut]).unwrap_err();
        assert_eq!(
            err,
            DdmError::MissingSection {
                path: "performance_measures".into()
            }
        );
    }

    #[test]
    fn with_method_requires_thresholds() {
        let m = parse_ddm(REFERENCE_DDM).unwrap();
        let err = m.with_method(SelectionMethod::Threshold).unwrap_err();
        assert!(matches!(err, DdmError::MissingThresholdValue { .. }));
    }

    #[test]
    fn yaml_round_trip_of_reference_model() {
        let m = parse_ddm(REFERENCE_DDM).unwrap();
        let again = parse_ddm(&m.to_yaml_string()).unwrap();
        assert_eq!(m, again);
    }
}
