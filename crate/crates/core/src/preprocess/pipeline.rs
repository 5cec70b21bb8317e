use super::lasso::select_by_lasso;
use super::normalise::{fit_normalisation, FeatureNormalisation, NormalisationKind};
use super::selection::{select_by_correlation, select_by_variance, SelectionConfig};
use super::target::{fit_target_transform, TargetTransform, TargetTransformKind};
use super::{PreprocessError, Result};
use crate::matrix::Matrix;
use crate::tabular::{Dataset, ProblemType};
use serde::{Deserialize, Serialize};

pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreprocessConfig {
    #[serde(default)]
    pub feature_normalisation: NormalisationKind,
    #[serde(default)]
    pub target_transform: TargetTransformKind,
    #[serde(default)]
    pub selection: SelectionConfig,
}

impl PreprocessConfig {
    pub fn is_identity(&self) -> bool {
        self.feature_normalisation == NormalisationKind::None
            && self.target_transform == TargetTransformKind::None
            && !self.selection.use_variance
            && !self.selection.use_correlation
            && !self.selection.use_lasso
    }
}

/// One recorded step, with the features that survived it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PipelineStep {
    VarianceThreshold { threshold: f64, surviving_features: Vec<String> },
    CorrelationThreshold { threshold: f64, surviving_features: Vec<String> },
    Lasso { lambda: f64, surviving_features: Vec<String> },
    FeatureNormalisation { kind: NormalisationKind },
    TargetTransform { kind: TargetTransformKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParams {
    pub feature_normalisation: FeatureNormalisation,
    pub target_transform: TargetTransform,
}

/// Ordered record of fitted preprocessing. `apply` never refits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformPipeline {
    pub steps: Vec<PipelineStep>,
    pub input_features: Vec<String>,
    pub surviving_features: Vec<String>,
    pub fitted_params: FittedParams,
    pub version: u32,
}

fn pick(names: &[String], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| names[i].clone()).collect()
}

/// Fits every configured step on `ds` (the experiment's training data).
pub fn build_pipeline(config: &PreprocessConfig, ds: &Dataset) -> Result<TransformPipeline> {
    config.selection.validate()?;
    if let Some(c) = ds.feature_columns().find(|c| !c.is_numeric()) {
        return Err(PreprocessError::SchemaMismatch(format!("feature `{}` is not numeric", c.name)));
    }
    if ds.problem_type() == ProblemType::Classification && config.target_transform != TargetTransformKind::None {
        return Err(PreprocessError::InvalidConfig(
            "target transforms apply to regression problems only".into(),
        ));
    }
    let input = ds.feature_names();
    let y = ds.target();
    let mut names = input.clone();
    let mut x = ds.features();
    let mut steps = Vec::new();
    let sel = &config.selection;

    if sel.use_variance {
        let keep = select_by_variance(&x, sel.variance_threshold)?;
        x = x.select_columns(&keep);
        names = pick(&names, &keep);
        steps.push(PipelineStep::VarianceThreshold { threshold: sel.variance_threshold, surviving_features: names.clone() });
    }
    if sel.use_correlation {
        let keep = select_by_correlation(&x, sel.correlation_threshold);
        x = x.select_columns(&keep);
        names = pick(&names, &keep);
        steps.push(PipelineStep::CorrelationThreshold {
            threshold: sel.correlation_threshold,
            surviving_features: names.clone(),
        });
    }
    if sel.use_lasso {
        let keep = select_by_lasso(&x, &y, sel.lasso_lambda, ds.problem_type())?;
        x = x.select_columns(&keep);
        names = pick(&names, &keep);
        steps.push(PipelineStep::Lasso { lambda: sel.lasso_lambda, surviving_features: names.clone() });
    }
    let norm = fit_normalisation(config.feature_normalisation, &x, &names)?;
    if config.feature_normalisation != NormalisationKind::None {
        steps.push(PipelineStep::FeatureNormalisation { kind: config.feature_normalisation });
    }
    let target = fit_target_transform(config.target_transform, &y)?;
    if config.target_transform != TargetTransformKind::None {
        steps.push(PipelineStep::TargetTransform { kind: config.target_transform });
    }
    Ok(TransformPipeline {
        steps,
        input_features: input,
        surviving_features: names,
        fitted_params: FittedParams { feature_normalisation: norm, target_transform: target },
        version: PIPELINE_VERSION,
    })
}

impl TransformPipeline {
    pub fn identity(features: Vec<String>) -> Self {
        Self {
            steps: Vec::new(),
            surviving_features: features.clone(),
            input_features: features,
            fitted_params: FittedParams {
                feature_normalisation: FeatureNormalisation::None,
                target_transform: TargetTransform::None,
            },
            version: PIPELINE_VERSION,
        }
    }

    /// Transforms a feature block whose columns are named by `names`.
    /// Every original input feature must be present; extra columns are ignored.
    pub fn apply_features(&self, names: &[String], x: &Matrix) -> Result<Matrix> {
        for f in &self.input_features {
            if !names.contains(f) {
                return Err(PreprocessError::MissingFeature(f.clone()));
            }
        }
        let idx: Vec<usize> = self
            .surviving_features
            .iter()
            .map(|f| names.iter().position(|n| n == f).expect("checked above"))
            .collect();
        Ok(self.fitted_params.feature_normalisation.apply(&x.select_columns(&idx)))
    }

    pub fn transform_target(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.fitted_params.target_transform.forward(y)
    }

    pub fn inverse_target(&self, z: &[f64]) -> Vec<f64> {
        self.fitted_params.target_transform.inverse(z)
    }

    pub fn target_transform(&self) -> &TargetTransform {
        &self.fitted_params.target_transform
    }

    /// Transforms training data: selected and normalised features, and the
    /// transformed target for regression.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let x = self.apply_features(&ds.feature_names(), &ds.features())?;
        let y = match ds.problem_type() {
            ProblemType::Regression => Some(self.transform_target(&ds.target())?),
            ProblemType::Classification => None,
        };
        ds.with_numeric_data(&self.surviving_features, &x, y.as_deref())
            .map_err(|e| PreprocessError::SchemaMismatch(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s).map_err(|e| PreprocessError::SchemaMismatch(e.to_string()))?;
        if p.version != PIPELINE_VERSION {
            return Err(PreprocessError::SchemaMismatch(format!("unsupported pipeline version {}", p.version)));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::mean_sd;
    use crate::rng::Rng;
    use crate::tabular::Column;

    fn dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::stream(seed, "pipeline");
        let a: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.0, 10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.normal() * 3.0 + 1.0).collect();
        let c = a.iter().map(|v| 2.0 * v + 1.0).collect::<Vec<_>>();
        let d = vec![4.0; n];
        let y: Vec<f64> = (0..n).map(|i| 1.0 + a[i] + 0.5 * b[i] + rng.normal() * 0.1 + 20.0).collect();
        Dataset::new(
            "p",
            vec![
                Column::numeric("a", a),
                Column::numeric("b", b),
                Column::numeric("c", c),
                Column::numeric("d", d),
                Column::numeric("y", y),
            ],
            4,
            ProblemType::Regression,
        )
        .unwrap()
    }

    #[test]
    fn all_off_is_identity() {
        let ds = dataset(30, 1);
        let p = build_pipeline(&PreprocessConfig::default(), &ds).unwrap();
        assert!(p.steps.is_empty());
        assert_eq!(p.apply(&ds).unwrap(), ds);
    }

    #[test]
    fn full_pipeline_selects_and_scales() {
        let ds = dataset(80, 2);
        let cfg = PreprocessConfig {
            feature_normalisation: NormalisationKind::Minmax,
            target_transform: TargetTransformKind::Log,
            selection: SelectionConfig { use_variance: true, use_correlation: true, use_lasso: true, ..Default::default() },
        };
        let p = build_pipeline(&cfg, &ds).unwrap();
        assert_eq!(p.surviving_features, vec!["a", "b"]);
        let out = p.apply(&ds).unwrap();
        for col in out.features().columns() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!((lo, hi), (0.0, 1.0));
        }
        // re-application is refit free and byte-stable
        assert_eq!(p.apply(&ds).unwrap().to_csv_string(), out.to_csv_string());
        let back = TransformPipeline::from_json(&p.to_json()).unwrap();
        assert_eq!(back.to_json(), p.to_json());
        assert_eq!(back.apply(&ds).unwrap(), out);
    }

    #[test]
    fn standardisation_moments() {
        let ds = dataset(57, 3).with_features(&["a".into(), "b".into()]).unwrap();
        let cfg = PreprocessConfig { feature_normalisation: NormalisationKind::Standardisation, ..Default::default() };
        let out = build_pipeline(&cfg, &ds).unwrap().apply(&ds).unwrap();
        for col in out.features().columns() {
            let (m, sd) = mean_sd(&col);
            assert!(m.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_feature_on_apply() {
        let ds = dataset(20, 4);
        let p = build_pipeline(&PreprocessConfig::default(), &ds).unwrap();
        let names = vec!["a".to_string(), "b".into(), "d".into()];
        let err = p.apply_features(&names, &Matrix::zeros(2, 3)).unwrap_err();
        assert_eq!(err, PreprocessError::MissingFeature("c".into()));
    }
}
