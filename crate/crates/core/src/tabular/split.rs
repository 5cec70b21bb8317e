use super::dataset::{Dataset, ProblemType};
use super::{Result, TabularError};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    /// Train and test on every row.
    None,
    Holdout,
    Kfold,
    /// Train on a resample with replacement, test on the out-of-bag rows.
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub method: SplitMethod,
    #[serde(default)]
    pub test_size: Option<f64>,
    #[serde(default)]
    pub k_folds: Option<usize>,
    #[serde(default)]
    pub n_bootstraps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SplitPlan {
    pub fn none(seed: u64) -> Self {
        Self { method: SplitMethod::None, test_size: None, k_folds: None, n_bootstraps: None, seed }
    }

    pub fn holdout(test_size: f64, seed: u64) -> Self {
        Self { method: SplitMethod::Holdout, test_size: Some(test_size), ..Self::none(seed) }
    }

    pub fn kfold(k: usize, seed: u64) -> Self {
        Self { method: SplitMethod::Kfold, k_folds: Some(k), ..Self::none(seed) }
    }

    pub fn bootstrap(n_bootstraps: usize, seed: u64) -> Self {
        Self { method: SplitMethod::Bootstrap, n_bootstraps: Some(n_bootstraps), ..Self::none(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TabularError::InvalidPlan(m.to_string()));
        match self.method {
            SplitMethod::None => Ok(()),
            SplitMethod::Holdout => match self.test_size {
                Some(t) if t > 0.0 && t < 1.0 => Ok(()),
                Some(t) => bad(&format!("test_size {t} is not in (0, 1)")),
                None => bad("holdout requires test_size"),
            },
            SplitMethod::Kfold => match self.k_folds {
                Some(k) if k >= 2 => Ok(()),
                Some(k) => bad(&format!("k_folds {k} must be at least 2")),
                None => bad("kfold requires k_folds"),
            },
            SplitMethod::Bootstrap => match self.n_bootstraps {
                Some(b) if b >= 1 => Ok(()),
                Some(_) => bad("n_bootstraps must be at least 1"),
                None => bad("bootstrap requires n_bootstraps"),
            },
        }
    }

    pub fn n_splits(&self) -> usize {
        match self.method {
            SplitMethod::None | SplitMethod::Holdout => 1,
            SplitMethod::Kfold => self.k_folds.unwrap_or(0),
            SplitMethod::Bootstrap => self.n_bootstraps.unwrap_or(0),
        }
    }
}

/// One train/test partition of row indices (both sorted ascending; bootstrap
/// train sets may repeat indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits a dataset; classification splits are stratified by class.
pub fn make_splits(ds: &Dataset, plan: &SplitPlan) -> Result<Vec<Split>> {
    let strata: Option<Vec<usize>> = match ds.problem_type() {
        ProblemType::Classification => Some(ds.target().iter().map(|&c| c as usize).collect()),
        ProblemType::Regression => None,
    };
    let labels = ds.class_labels().map(<[String]>::to_vec);
    split_indices(ds.n_rows(), strata.as_deref(), labels.as_deref(), plan)
}

/// Index-level splitter; `strata[i]` is the class code of row `i`.
pub fn split_indices(
    n: usize,
    strata: Option<&[usize]>,
    labels: Option<&[String]>,
    plan: &SplitPlan,
) -> Result<Vec<Split>> {
    plan.validate()?;
    let mut rng = Rng::stream(plan.seed, "split");
    let groups = group_rows(n, strata);
    let class_name = |c: usize| labels.and_then(|l| l.get(c).cloned()).unwrap_or_else(|| c.to_string());

    let mut splits = match plan.method {
        SplitMethod::None => vec![Split { train: (0..n).collect(), test: (0..n).collect() }],
        SplitMethod::Holdout => {
            if n < 2 {
                return Err(TabularError::InvalidPlan("holdout needs at least 2 rows".into()));
            }
            let t = plan.test_size.expect("validated");
            let n_test = ((t * n as f64).round() as usize).clamp(1, n - 1);
            let quotas = allocate(&groups.iter().map(Vec::len).collect::<Vec<_>>(), n_test);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (members, q) in groups.iter().zip(quotas) {
                let mut m = members.clone();
                rng.shuffle(&mut m);
                test.extend_from_slice(&m[..q]);
                train.extend_from_slice(&m[q..]);
            }
            vec![Split { train, test }]
        }
        SplitMethod::Kfold => {
            let k = plan.k_folds.expect("validated");
            if k > n {
                return Err(TabularError::EmptyFold);
            }
            if strata.is_some() {
                for (c, members) in groups.iter().enumerate() {
                    if !members.is_empty() && members.len() < k {
                        return Err(TabularError::StratificationImpossible {
                            class: class_name(c),
                            count: members.len(),
                            needed: k,
                        });
                    }
                }
            }
            let mut fold_of = vec![0usize; n];
            let mut pos = 0usize;
            for members in &groups {
                let mut m = members.clone();
                rng.shuffle(&mut m);
                for i in m {
                    fold_of[i] = pos % k;
                    pos += 1;
                }
            }
            (0..k)
                .map(|f| Split {
                    train: (0..n).filter(|&i| fold_of[i] != f).collect(),
                    test: (0..n).filter(|&i| fold_of[i] == f).collect(),
                })
                .collect()
        }
        SplitMethod::Bootstrap => {
            let b = plan.n_bootstraps.expect("validated");
            let mut out = Vec::with_capacity(b);
            for _ in 0..b {
                let mut drawn = vec![false; n];
                let mut train = Vec::with_capacity(n);
                for members in &groups {
                    for _ in 0..members.len() {
                        let i = members[rng.below(members.len())];
                        drawn[i] = true;
                        train.push(i);
                    }
                }
                let test: Vec<usize> = (0..n).filter(|&i| !drawn[i]).collect();
                if test.is_empty() {
                    return Err(TabularError::EmptyFold);
                }
                out.push(Split { train, test });
            }
            out
        }
    };
    for s in &mut splits {
        s.train.sort_unstable();
        s.test.sort_unstable();
        if s.train.is_empty() || s.test.is_empty() {
            return Err(TabularError::EmptyFold);
        }
    }
    Ok(splits)
}

fn group_rows(n: usize, strata: Option<&[usize]>) -> Vec<Vec<usize>> {
    match strata {
        None => vec![(0..n).collect()],
        Some(s) => {
            let k = s.iter().copied().max().map_or(0, |m| m + 1);
            let mut g = vec![Vec::new(); k];
            for (i, &c) in s.iter().enumerate() {
                g[c].push(i);
            }
            g
        }
    }
}

/// Largest-remainder apportionment of `total` across groups of the given sizes.
fn allocate(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * total as f64 / n as f64).collect();
    let mut q: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total - q.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &g in order.iter().cycle().take(sizes.len() * 2) {
        if rest == 0 {
            break;
        }
        if q[g] < sizes[g] {
            q[g] += 1;
            rest -= 1;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kfold_ten_rows_five_folds() {
        let s = split_indices(10, None, None, &SplitPlan::kfold(5, 1221)).unwrap();
        assert_eq!(s.len(), 5);
        let mut all: Vec<usize> = s.iter().flat_map(|f| f.test.clone()).collect();
        assert!(s.iter().all(|f| f.test.len() == 2 && f.train.len() == 8));
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_eighty_twenty() {
        let s = split_indices(100, None, None, &SplitPlan::holdout(0.2, 1221)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].train.len(), 80);
        assert_eq!(s[0].test.len(), 20);
    }

    #[test]
    fn bootstrap_out_of_bag_pinned() {
        let s = split_indices(50, None, None, &SplitPlan::bootstrap(1, 1221)).unwrap();
        assert_eq!(s[0].train.len(), 50);
        let oob = s[0].test.len();
        assert!((13..=23).contains(&oob), "{oob}");
        assert_eq!(oob, PINNED_OOB_N50_SEED1221);
        for i in &s[0].test {
            assert!(!s[0].train.contains(i));
        }
    }

    const PINNED_OOB_N50_SEED1221: usize = 19;

    #[test]
    fn method_none_uses_everything() {
        let s = split_indices(7, None, None, &SplitPlan::none(0)).unwrap();
        assert_eq!(s[0].train, s[0].test);
        assert_eq!(s[0].train.len(), 7);
    }

    #[test]
    fn plan_errors() {
        assert!(matches!(
            split_indices(10, None, None, &SplitPlan::kfold(1, 0)),
            Err(TabularError::InvalidPlan(_))
        ));
        assert_eq!(split_indices(3, None, None, &SplitPlan::kfold(4, 0)), Err(TabularError::EmptyFold));
        let strata = [0, 0, 0, 0, 0, 1, 1];
        assert!(matches!(
            split_indices(7, Some(&strata), None, &SplitPlan::kfold(3, 0)),
            Err(TabularError::StratificationImpossible { count: 2, needed: 3, .. })
        ));
        assert!(matches!(
            split_indices(10, None, None, &SplitPlan::holdout(1.0, 0)),
            Err(TabularError::InvalidPlan(_))
        ));
    }

    #[test]
    fn plan_json_round_trip() {
        let p = SplitPlan { method: SplitMethod::None, test_size: Some(0.2), k_folds: Some(5), n_bootstraps: None, seed: 1221 };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<SplitPlan>(&s).unwrap(), p);
    }

    proptest! {
        #[test]
        fn kfold_partitions_rows(n in 2usize..60, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let s = split_indices(n, None, None, &SplitPlan::kfold(k, seed)).unwrap();
            let mut seen = vec![0u32; n];
            for f in &s {
                for &i in &f.test { seen[i] += 1; }
                prop_assert_eq!(f.train.len() + f.test.len(), n);
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn stratified_folds_keep_proportions(n0 in 5usize..40, n1 in 5usize..40, k in 2usize..5, seed in any::<u64>()) {
            let strata: Vec<usize> = (0..n0 + n1).map(|i| usize::from(i >= n0)).collect();
            let s = split_indices(n0 + n1, Some(&strata), None, &SplitPlan::kfold(k, seed)).unwrap();
            for f in &s {
                let pos = f.test.iter().filter(|&&i| strata[i] == 1).count() as f64;
                let neg = f.test.len() as f64 - pos;
                prop_assert!((pos - n1 as f64 / k as f64).abs() <= 1.0);
                prop_assert!((neg - n0 as f64 / k as f64).abs() <= 1.0);
            }
        }

        #[test]
        fn splits_are_pure_functions_of_seed(n in 5usize..40, seed in any::<u64>()) {
            let p = SplitPlan::bootstrap(3, seed);
            prop_assume!(split_indices(n, None, None, &p).is_ok());
            prop_assert_eq!(split_indices(n, None, None, &p).unwrap(), split_indices(n, None, None, &p).unwrap());
        }
    }
}
