use super::{PreprocessError, Result};
use crate::matrix::mean_sd;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetTransformKind {
    #[default]
    None,
    Log,
    Sqrt,
    Standardisation,
    Minmax,
}

/// Invertible map applied to a regression target. Metrics are always
/// reported after `inverse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetTransform {
    None,
    Log,
    Sqrt,
    Standardisation { mean: f64, sd: f64 },
    Minmax { min: f64, max: f64 },
}

pub fn fit_target_transform(kind: TargetTransformKind, y: &[f64]) -> Result<TargetTransform> {
    let t = match kind {
        TargetTransformKind::None => TargetTransform::None,
        TargetTransformKind::Log => TargetTransform::Log,
        TargetTransformKind::Sqrt => TargetTransform::Sqrt,
        TargetTransformKind::Standardisation => {
            let (mean, sd) = mean_sd(y);
            if !(sd > 0.0) {
                return Err(PreprocessError::ConstantColumn("target".into()));
            }
            TargetTransform::Standardisation { mean, sd }
        }
        TargetTransformKind::Minmax => {
            let min = y.iter().copied().fold(f64::INFINITY, f64::min);
            let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(max > min) {
                return Err(PreprocessError::ZeroRange("target".into()));
            }
            TargetTransform::Minmax { min, max }
        }
    };
    t.check_domain(y)?;
    Ok(t)
}

impl TargetTransform {
    pub fn kind(&self) -> TargetTransformKind {
        match self {
            Self::None => TargetTransformKind::None,
            Self::Log => TargetTransformKind::Log,
            Self::Sqrt => TargetTransformKind::Sqrt,
            Self::Standardisation { .. } => TargetTransformKind::Standardisation,
            Self::Minmax { .. } => TargetTransformKind::Minmax,
        }
    }

    fn check_domain(&self, y: &[f64]) -> Result<()> {
        match self {
            Self::Log => match y.iter().find(|&&v| v <= 0.0) {
                Some(&v) => Err(PreprocessError::NonPositiveTarget(v)),
                None => Ok(()),
            },
            Self::Sqrt => match y.iter().find(|&&v| v < 0.0) {
                Some(&v) => Err(PreprocessError::NegativeTarget(v)),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(y)?;
        Ok(y.iter().map(|&v| self.forward_one(v)).collect())
    }

    fn forward_one(&self, v: f64) -> f64 {
        match self {
            Self::None => v,
            Self::Log => v.ln(),
            Self::Sqrt => v.sqrt(),
            Self::Standardisation { mean, sd } => (v - mean) / sd,
            Self::Minmax { min, max } => (v - min) / (max - min),
        }
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.inverse_one(v)).collect()
    }

    pub fn inverse_one(&self, v: f64) -> f64 {
        match self {
            Self::None => v,
            Self::Log => v.exp(),
            // predictions may dip below zero; the square map stays defined there
            Self::Sqrt => v * v,
            Self::Standardisation { mean, sd } => v * sd + mean,
            Self::Minmax { min, max } => v * (max - min) + min,
        }
    }
}
