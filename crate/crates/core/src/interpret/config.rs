use super::{InterpretError, Result, Scoring};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalMethods {
    pub permutation: bool,
    pub shap: bool,
}

impl Default for GlobalMethods {
    fn default() -> Self {
        Self { permutation: true, shap: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalMethods {
    pub lime: bool,
    pub shap: bool,
}

impl Default for LocalMethods {
    fn default() -> Self {
        Self { lime: true, shap: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleMethods {
    pub mean: bool,
    pub majority_vote: bool,
}

impl Default for EnsembleMethods {
    fn default() -> Self {
        Self { mean: true, majority_vote: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    pub global_methods: GlobalMethods,
    pub local_methods: LocalMethods,
    pub ensemble: EnsembleMethods,
    pub num_features_to_plot: usize,
    /// Defaults to accuracy for classification when left empty.
    pub permutation_scoring: String,
    pub permutation_repeats: usize,
    pub shap_background_size: usize,
    /// `None` uses 2d + 2048, the usual Kernel SHAP budget.
    pub shap_coalition_samples: Option<usize>,
    pub lime_samples: usize,
    /// Rows explained locally (sampled by seed when fewer than n).
    pub local_instances: usize,
    /// Top-k used by the majority vote.
    pub majority_vote_k: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            global_methods: GlobalMethods::default(),
            local_methods: LocalMethods::default(),
            ensemble: EnsembleMethods::default(),
            num_features_to_plot: 10,
            permutation_scoring: "neg_mean_absolute_error".into(),
            permutation_repeats: 5,
            shap_background_size: 100,
            shap_coalition_samples: None,
            lime_samples: 5000,
            local_instances: 50,
            majority_vote_k: 5,
        }
    }
}

impl ImportanceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(InterpretError::InvalidConfig(m.into()));
        if self.permutation_repeats == 0 {
            return bad("permutation_repeats must be ≥ 1");
        }
        if self.lime_samples < 50 {
            return bad("lime_samples must be ≥ 50");
        }
        if self.shap_background_size == 0 {
            return bad("shap_background_size must be ≥ 1");
        }
        if self.majority_vote_k == 0 || self.num_features_to_plot == 0 {
            return bad("majority_vote_k and num_features_to_plot must be ≥ 1");
        }
        Scoring::parse(&self.permutation_scoring).map(|_| ())
    }
}
