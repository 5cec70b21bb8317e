use super::{LearnError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    #[serde(alias = "multiple linear regression", alias = "linear regression")]
    LinearRegression,
    #[serde(alias = "multiple linear regression with expectation maximisation")]
    Mlrem,
    #[serde(alias = "logistic regression")]
    LogisticRegression,
    #[serde(alias = "random forest")]
    RandomForest,
    #[serde(alias = "gradient boosting", alias = "xgboost", alias = "XGBoost")]
    GradientBoosting,
    #[serde(alias = "support vector machine", alias = "SVM")]
    Svm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 6] = [
        ModelFamily::LinearRegression,
        ModelFamily::Mlrem,
        ModelFamily::LogisticRegression,
        ModelFamily::RandomForest,
        ModelFamily::GradientBoosting,
        ModelFamily::Svm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::LinearRegression => "linear_regression",
            ModelFamily::Mlrem => "mlrem",
            ModelFamily::LogisticRegression => "logistic_regression",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::GradientBoosting => "gradient_boosting",
            ModelFamily::Svm => "svm",
        }
    }

    /// Parameter names the family accepts.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelFamily::LinearRegression => &[],
            ModelFamily::Mlrem => &["alpha", "max_beta", "weight_threshold", "max_iterations", "tolerance"],
            ModelFamily::LogisticRegression => &["l2", "max_iterations"],
            ModelFamily::RandomForest => &["n_estimators", "min_samples_split", "min_samples_leaf", "max_depth"],
            ModelFamily::GradientBoosting => {
                &["n_estimators", "learning_rate", "max_depth", "min_samples_split", "min_samples_leaf"]
            }
            ModelFamily::Svm => &["C", "kernel", "gamma", "epsilon", "max_iterations"],
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| LearnError::InvalidParam { name: "family".into(), reason: format!("unknown family `{s}`") })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Null => f.write_str("None"),
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x:?}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

pub type Params = BTreeMap<String, ParamValue>;

pub(super) fn check_names(family: ModelFamily, params: &Params) -> Result<()> {
    for k in params.keys() {
        if !family.param_names().contains(&k.as_str()) {
            return Err(LearnError::UnknownParam { family: family.as_str().into(), name: k.clone() });
        }
    }
    Ok(())
}

fn invalid(name: &str, reason: &str) -> LearnError {
    LearnError::InvalidParam { name: name.into(), reason: reason.into() }
}

pub(super) fn get_f64(p: &Params, name: &str, default: f64) -> Result<f64> {
    match p.get(name) {
        None | Some(ParamValue::Null) => Ok(default),
        Some(v) => v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| invalid(name, "expected a number")),
    }
}

pub(super) fn get_usize(p: &Params, name: &str, default: usize) -> Result<usize> {
    match p.get(name) {
        None | Some(ParamValue::Null) => Ok(default),
        Some(ParamValue::Int(i)) if *i >= 0 => Ok(*i as usize),
        Some(ParamValue::Float(f)) if *f >= 0.0 && f.fract() == 0.0 => Ok(*f as usize),
        _ => Err(invalid(name, "expected a non-negative integer")),
    }
}

pub(super) fn get_opt_usize(p: &Params, name: &str) -> Result<Option<usize>> {
    match p.get(name) {
        None | Some(ParamValue::Null) => Ok(None),
        _ => get_usize(p, name, 0).map(Some),
    }
}

/// A sample count given either as an integer or as a fraction of n (< 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleCount {
    Count(usize),
    Fraction(f64),
}

impl SampleCount {
    pub fn resolve(&self, n: usize, floor: usize) -> usize {
        match *self {
            SampleCount::Count(c) => c.max(floor),
            SampleCount::Fraction(f) => ((f * n as f64).ceil() as usize).max(floor),
        }
    }

    pub fn to_param(self) -> ParamValue {
        match self {
            SampleCount::Count(c) => ParamValue::Int(c as i64),
            SampleCount::Fraction(f) => ParamValue::Float(f),
        }
    }
}

pub(super) fn get_samples(p: &Params, name: &str, default: usize, min_count: usize) -> Result<SampleCount> {
    match p.get(name) {
        None | Some(ParamValue::Null) => Ok(SampleCount::Count(default)),
        Some(v) => {
            let x = v.as_f64().ok_or_else(|| invalid(name, "expected a count or a fraction"))?;
            if x > 0.0 && x < 1.0 {
                Ok(SampleCount::Fraction(x))
            } else if x >= min_count as f64 && x.fract() == 0.0 {
                Ok(SampleCount::Count(x as usize))
            } else {
                Err(invalid(name, &format!("expected an integer ≥ {min_count} or a fraction in (0, 1)")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorded_family_names_parse() {
        let f: ModelFamily = "multiple linear regression with expectation maximisation".parse().unwrap();
        assert_eq!(f, ModelFamily::Mlrem);
        assert_eq!("random forest".parse::<ModelFamily>().unwrap(), ModelFamily::RandomForest);
        assert_eq!("xgboost".parse::<ModelFamily>().unwrap(), ModelFamily::GradientBoosting);
    }

    #[test]
    fn mixed_sample_grid() {
        let grid: Vec<ParamValue> = serde_json::from_str("[2, 0.05, 0.1, null]").unwrap();
        assert_eq!(grid[0], ParamValue::Int(2));
        assert_eq!(grid[3], ParamValue::Null);
        let mut p = Params::new();
        p.insert("min_samples_split".into(), grid[1].clone());
        assert_eq!(get_samples(&p, "min_samples_split", 2, 2).unwrap().resolve(200, 2), 10);
        p.insert("min_samples_split".into(), ParamValue::Int(1));
        assert!(get_samples(&p, "min_samples_split", 2, 2).is_err());
    }
}
