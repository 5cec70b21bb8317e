use super::{PreprocessError, Result};
use crate::matrix::{mean_sd, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalisationKind {
    #[default]
    None,
    /// z-score: mean 0, population sd 1.
    Standardisation,
    Minmax,
}

/// Per-feature fitted scaling. Application to unseen data extrapolates
/// linearly; values are never clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureNormalisation {
    None,
    Standardisation { means: Vec<f64>, sds: Vec<f64> },
    Minmax { mins: Vec<f64>, maxs: Vec<f64> },
}

pub fn fit_normalisation(kind: NormalisationKind, x: &Matrix, names: &[String]) -> Result<FeatureNormalisation> {
    match kind {
        NormalisationKind::None => Ok(FeatureNormalisation::None),
        NormalisationKind::Standardisation => {
            let mut means = Vec::with_capacity(x.ncols());
            let mut sds = Vec::with_capacity(x.ncols());
            for j in 0..x.ncols() {
                let (m, sd) = mean_sd(&x.column(j));
                if !(sd > 0.0) {
                    return Err(PreprocessError::ConstantColumn(names[j].clone()));
                }
                means.push(m);
                sds.push(sd);
            }
            Ok(FeatureNormalisation::Standardisation { means, sds })
        }
        NormalisationKind::Minmax => {
            let mut mins = Vec::with_capacity(x.ncols());
            let mut maxs = Vec::with_capacity(x.ncols());
            for j in 0..x.ncols() {
                let c = x.column(j);
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !(hi > lo) {
                    return Err(PreprocessError::ZeroRange(names[j].clone()));
                }
                mins.push(lo);
                maxs.push(hi);
            }
            Ok(FeatureNormalisation::Minmax { mins, maxs })
        }
    }
}

impl FeatureNormalisation {
    pub fn kind(&self) -> NormalisationKind {
        match self {
            Self::None => NormalisationKind::None,
            Self::Standardisation { .. } => NormalisationKind::Standardisation,
            Self::Minmax { .. } => NormalisationKind::Minmax,
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        match self {
            Self::None => {}
            Self::Standardisation { means, sds } => {
                for i in 0..out.nrows() {
                    for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                        *v = (*v - means[j]) / sds[j];
                    }
                }
            }
            Self::Minmax { mins, maxs } => {
                for i in 0..out.nrows() {
                    for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                        *v = (*v - mins[j]) / (maxs[j] - mins[j]);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_columns(&[v.to_vec()])
    }

    #[test]
    fn minmax_examples() {
        let n = fit_normalisation(NormalisationKind::Minmax, &col(&[1.0, 2.0, 3.0]), &names(1)).unwrap();
        assert_eq!(n.apply(&col(&[1.0, 2.0, 3.0])).column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(n.apply(&col(&[4.0])).column(0), vec![1.5]);
    }

    #[test]
    fn standardisation_two_points() {
        let n = fit_normalisation(NormalisationKind::Standardisation, &col(&[0.0, 2.0]), &names(1)).unwrap();
        assert_eq!(n.apply(&col(&[0.0, 2.0])).column(0), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_columns_rejected() {
        let c = col(&[5.0, 5.0, 5.0]);
        assert_eq!(
            fit_normalisation(NormalisationKind::Standardisation, &c, &names(1)).unwrap_err(),
            PreprocessError::ConstantColumn("f0".into())
        );
        assert_eq!(
            fit_normalisation(NormalisationKind::Minmax, &c, &names(1)).unwrap_err(),
            PreprocessError::ZeroRange("f0".into())
        );
    }
}
