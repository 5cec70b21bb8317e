use super::{ProvenanceError, Result};
use helixforge_core::fuzzy::FuzzyConfig;
use helixforge_core::interpret::ImportanceConfig;
use helixforge_core::learners::{ModelFamily, ModelSpec, ParamValue, TrainOptions};
use helixforge_core::preprocess::PreprocessConfig;
use helixforge_core::stats::PlotOptions;
use helixforge_core::tabular::{IngestPolicy, SplitPlan};
use helixforge_core::ProblemType;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

pub const FORMAT_VERSION: u32 = 1;

/// Fields written by a newer version; carried through rewrites untouched.
type Extra = BTreeMap<String, Value>;

fn v1() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOptions {
    #[serde(default = "v1")]
    pub format_version: u32,
    pub experiment_name: String,
    pub random_state: u64,
    pub problem_type: ProblemType,
    pub dependent_variable: String,
    pub created_at: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataOptions {
    #[serde(default = "v1")]
    pub format_version: u32,
    /// Relative to the experiment root, so a copied experiment stays valid.
    pub data_path: String,
    pub data_split: SplitPlan,
    #[serde(default)]
    pub ingest_policy: IngestPolicy,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlottingOptions {
    #[serde(default = "v1")]
    pub format_version: u32,
    #[serde(flatten)]
    pub plot: PlotOptions,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingOptions {
    #[serde(default = "v1")]
    pub format_version: u32,
    #[serde(flatten)]
    pub config: PreprocessConfig,
    #[serde(default = "yes")]
    pub data_is_preprocessed: bool,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    #[serde(rename = "use", default = "yes")]
    pub use_model: bool,
    #[serde(default)]
    pub params: BTreeMap<String, Vec<ParamValue>>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlOptions {
    #[serde(default = "v1")]
    pub format_version: u32,
    /// Keyed by family name; the long names used in the UI are accepted.
    pub model_types: BTreeMap<String, ModelEntry>,
    #[serde(default = "yes")]
    pub use_hyperparam_search: bool,
    #[serde(default = "five")]
    pub inner_folds: usize,
    #[serde(default = "yes")]
    pub save_models: bool,
    #[serde(default = "yes")]
    pub save_actual_pred_plots: bool,
    #[serde(flatten)]
    pub extra: Extra,
}

fn five() -> usize {
    5
}

impl MlOptions {
    pub fn new(models: &[ModelSpec]) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            model_types: models
                .iter()
                .map(|m| (m.family.as_str().to_string(), ModelEntry { use_model: m.use_model, params: m.param_grid.clone() }))
                .collect(),
            use_hyperparam_search: true,
            inner_folds: 5,
            save_models: true,
            save_actual_pred_plots: true,
            extra: Extra::new(),
        }
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        let mut models = Vec::new();
        for (name, entry) in &self.model_types {
            let family: ModelFamily = name.parse().map_err(|_| ProvenanceError::Invalid(format!("model_types: unknown model `{name}`")))?;
            let spec = ModelSpec { family, param_grid: entry.params.clone(), use_model: entry.use_model };
            spec.validate().map_err(|e| ProvenanceError::Invalid(format!("model_types.{name}: {e}")))?;
            models.push(spec);
        }
        models.sort_by_key(|m| m.family);
        if !models.iter().any(|m| m.use_model) {
            return Err(ProvenanceError::Invalid("model_types: no model selected".into()));
        }
        Ok(TrainOptions { models, use_hyperparam_search: self.use_hyperparam_search, inner_folds: self.inner_folds })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiOptions {
    #[serde(default = "v1")]
    pub format_version: u32,
    #[serde(flatten)]
    pub importance: ImportanceConfig,
    #[serde(default)]
    pub fuzzy: FuzzyConfig,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Default for FiOptions {
    fn default() -> Self {
        Self { format_version: FORMAT_VERSION, importance: ImportanceConfig::default(), fuzzy: FuzzyConfig::default(), extra: Extra::new() }
    }
}

impl Default for PlottingOptions {
    fn default() -> Self {
        Self { format_version: FORMAT_VERSION, plot: PlotOptions::default(), extra: Extra::new() }
    }
}

impl Default for PreprocessingOptions {
    fn default() -> Self {
        Self { format_version: FORMAT_VERSION, config: PreprocessConfig::default(), data_is_preprocessed: true, extra: Extra::new() }
    }
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("options serialise");
    s.push('\n');
    s.into_bytes()
}

/// Parses an options file and checks its version; `file` names it in errors.
pub(crate) fn from_json<T: DeserializeOwned>(file: &str, bytes: &[u8]) -> Result<T> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProvenanceError::CorruptLayout(format!("{file}: {e}")))?;
    let found = value.get("format_version").and_then(Value::as_u64).unwrap_or(FORMAT_VERSION as u64) as u32;
    if found != FORMAT_VERSION {
        return Err(ProvenanceError::VersionMismatch { found, expected: FORMAT_VERSION });
    }
    serde_json::from_value(value).map_err(|e| ProvenanceError::CorruptLayout(format!("{file}: {e}")))
}

/// Parses a request body; errors are user errors naming the offending field.
pub fn parse_request<T: DeserializeOwned>(what: &str, value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| ProvenanceError::Invalid(format!("{what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_survive_a_rewrite() {
        let text = r#"{"format_version": 1, "num_features_to_plot": 7, "future_knob": {"a": [1, 2]}, "fuzzy": {"top_rules": 4}}"#;
        let fi: FiOptions = from_json("fi.json", text.as_bytes()).unwrap();
        assert_eq!(fi.importance.num_features_to_plot, 7);
        assert_eq!(fi.fuzzy.top_rules, 4);
        assert_eq!(fi.extra["future_knob"], serde_json::json!({"a": [1, 2]}));
        let again: FiOptions = from_json("fi.json", &to_json(&fi)).unwrap();
        assert_eq!(again, fi);
        assert_eq!(to_json(&again), to_json(&fi));

        let p: PlottingOptions = from_json("plotting.json", br#"{"dpi": 100, "legend_position": "top"}"#).unwrap();
        assert_eq!(p.plot.dpi, 100);
        assert_eq!(p.extra.len(), 1);
    }

    #[test]
    fn version_and_model_names() {
        let err = from_json::<FiOptions>("fi.json", br#"{"format_version": 2}"#).unwrap_err();
        assert_eq!(err, ProvenanceError::VersionMismatch { found: 2, expected: 1 });
        let ml: MlOptions = serde_json::from_str(
            r#"{"model_types": {"multiple linear regression with expectation maximisation": {"use": true, "params": {"alpha": [0.05, 0.1, 0.5, 0.8]}},
                "random forest": {"use": false, "params": {}}}}"#,
        )
        .unwrap();
        let t = ml.train_options().unwrap();
        assert_eq!(t.models.len(), 2);
        assert!(t.models.iter().any(|m| m.family == ModelFamily::Mlrem && m.param_grid["alpha"].len() == 4));
        let bad: MlOptions = serde_json::from_str(r#"{"model_types": {"mystery": {}}}"#).unwrap();
        assert!(matches!(bad.train_options(), Err(ProvenanceError::Invalid(m)) if m.contains("mystery")));
    }
}
