use super::{InterpretError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Global,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalisation {
    Raw,
    SumToOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub method: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTensor {
    pub scope: Scope,
    pub normalisation: Normalisation,
    pub features: Vec<String>,
    pub slices: Vec<Slice>,
}

impl ImportanceTensor {
    pub fn new(scope: Scope, features: Vec<String>) -> Self {
        Self { scope, normalisation: Normalisation::Raw, features, slices: Vec::new() }
    }

    pub fn push(&mut self, method: &str, model: &str, instance: Option<usize>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.features.len() {
            return Err(InterpretError::InvalidConfig(format!(
                "slice {method}/{model} has {} values for {} features",
                values.len(),
                self.features.len()
            )));
        }
        self.slices.push(Slice { method: method.into(), model: model.into(), instance, values });
        Ok(())
    }

    pub fn get(&self, method: &str, model: &str) -> Option<&Slice> {
        self.slices.iter().find(|s| s.method == method && s.model == model && s.instance.is_none())
    }

    /// |v| / Σ|v| per slice; an all-zero slice becomes uniform.
    pub fn normalised(&self) -> ImportanceTensor {
        let mut out = self.clone();
        out.normalisation = Normalisation::SumToOne;
        for s in &mut out.slices {
            s.values = normalise(&s.values);
        }
        out
    }
}

fn normalise(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total == 0.0 || !total.is_finite() {
        return vec![1.0 / v.len() as f64; v.len()];
    }
    v.iter().map(|x| x.abs() / total).collect()
}

/// Mean across slices of the sum-to-one normalised importances.
pub fn fuse_mean(tensor: &ImportanceTensor) -> Result<Vec<f64>> {
    if tensor.slices.is_empty() {
        return Err(InterpretError::EmptyTensor);
    }
    let norm = tensor.normalised();
    let k = norm.slices.len() as f64;
    let mut out = vec![0.0; tensor.features.len()];
    for s in &norm.slices {
        for (o, v) in out.iter_mut().zip(&s.values) {
            *o += v / k;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub feature: String,
    pub index: usize,
    pub votes: usize,
    pub mean_importance: f64,
}

/// Every slice votes for its top-k features by |importance|; within a slice
/// ties go to the earlier feature and zero importances get no vote, so an
/// all-zero slice abstains. Features are ranked by votes, then mean
/// normalised importance, then column order. Returns the top k.
pub fn fuse_majority_vote(tensor: &ImportanceTensor, k: usize) -> Result<Vec<Vote>> {
    if tensor.slices.is_empty() {
        return Err(InterpretError::EmptyTensor);
    }
    let d = tensor.features.len();
    if k == 0 || k > d {
        return Err(InterpretError::InvalidConfig(format!("k must lie in 1..={d}")));
    }
    let mut votes = vec![0usize; d];
    for s in &tensor.slices {
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| s.values[b].abs().total_cmp(&s.values[a].abs()));
        idx[..k].iter().filter(|&&j| s.values[j] != 0.0).for_each(|&j| votes[j] += 1);
    }
    let mean = fuse_mean(tensor)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(mean[b].total_cmp(&mean[a])));
    Ok(order[..k]
        .iter()
        .map(|&j| Vote { feature: tensor.features[j].clone(), index: j, votes: votes[j], mean_importance: mean[j] })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor(slices: &[&[f64]]) -> ImportanceTensor {
        let d = slices[0].len();
        let mut t = ImportanceTensor::new(Scope::Global, (0..d).map(|j| format!("x{}", j + 1)).collect());
        for (i, s) in slices.iter().enumerate() {
            t.push("permutation", &format!("m{i}"), None, s.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn mean_examples() {
        assert_eq!(fuse_mean(&tensor(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap(), vec![0.5, 0.5]);
        assert_eq!(fuse_mean(&tensor(&[&[3.0, -1.0]])).unwrap(), vec![0.75, 0.25]);
        let empty = ImportanceTensor::new(Scope::Global, vec!["a".into()]);
        assert_eq!(fuse_mean(&empty), Err(InterpretError::EmptyTensor));
        assert_eq!(fuse_majority_vote(&empty, 1), Err(InterpretError::EmptyTensor));
        assert!(tensor(&[&[1.0]]).push("shap", "m", None, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn vote_examples() {
        let t = tensor(&[&[5.0, 4.0, 1.0, 0.0], &[3.0, 9.0, 0.5, 0.1], &[1.0, 1.0, 0.0, 0.0]]);
        let v = fuse_majority_vote(&t, 2).unwrap();
        assert_eq!(v.iter().map(|v| (v.index, v.votes)).collect::<Vec<_>>(), vec![(1, 3), (0, 3)]);
        let all = fuse_majority_vote(&t, 4).unwrap();
        assert_eq!(all.iter().map(|v| v.index).collect::<Vec<_>>(), vec![1, 0, 2, 3]);
        // tie in votes and importance resolves to column order
        let tie = tensor(&[&[1.0, 1.0, 0.0]]);
        assert_eq!(fuse_majority_vote(&tie, 1).unwrap()[0].index, 0);
        assert!(fuse_majority_vote(&t, 5).is_err());
        // a slice with no signal abstains instead of voting by column order
        let silent = tensor(&[&[0.0, 0.0, 0.0], &[0.0, 0.2, 0.1]]);
        let v = fuse_majority_vote(&silent, 2).unwrap();
        assert_eq!(v.iter().map(|v| (v.index, v.votes)).collect::<Vec<_>>(), vec![(1, 1), (2, 1)]);
    }

    proptest! {
        #[test]
        fn fusion_invariants(values in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 6), 1..8), k in 1usize..=6) {
            let slices: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
            let t = tensor(&slices);
            let m = fuse_mean(&t).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for s in &t.normalised().slices {
                prop_assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let all = fuse_majority_vote(&t, 6).unwrap();
            prop_assert_eq!(all.iter().map(|v| v.votes).sum::<usize>(), values.iter().flatten().filter(|v| **v != 0.0).count());
            let top = fuse_majority_vote(&t, k).unwrap();
            prop_assert_eq!(top.len(), k);
            // unanimity: every slice identical → common top-k with full votes
            let same: Vec<&[f64]> = vec![slices[0]; 3];
            let u = fuse_majority_vote(&tensor(&same), k).unwrap();
            prop_assert!(u.iter().all(|v| v.votes == 3));
        }
    }
}
