use crate::matrix::mean_sd;
use crate::tabular::Dataset;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    /// population
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Absent for constant columns.
    pub normality_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub columns: Vec<ColumnSummary>,
}

impl SummaryStats {
    pub fn column(&self, name: &str) -> Option<&ColumnSummary> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("column,count,mean,sd,min,q1,median,q3,max,skewness,excess_kurtosis,normality_p\n");
        for c in &self.columns {
            let p = c.normality_p.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.name, c.count, c.mean, c.sd, c.min, c.q1, c.median, c.q3, c.max, c.skewness, c.excess_kurtosis, p
            ));
        }
        out
    }
}

/// Type-7 quantile of an ascending slice.
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov distribution tail Q_KS(λ).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for k in 1..=100 {
        let term = sign * 2.0 * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-10 * prev.abs() || term.abs() <= 1e-12 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term;
    }
    // series failed to converge: λ is tiny
    1.0
}

/// One-sample KS test of `xs` against N(mean, sd) with parameters estimated
/// from the sample. Asymptotic p-value; no Lilliefors correction.
pub fn ks_normality_pvalue(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    let (m, sd) = mean_sd(xs);
    if n < 2 || sd <= 0.0 || !sd.is_finite() {
        return None;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = std_normal_cdf((x - m) / sd);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let sq = nf.sqrt();
    Some(kolmogorov_q((sq + 0.12 + 0.11 / sq) * d))
}

fn summarize_column(name: &str, xs: &[f64]) -> ColumnSummary {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let (mean, sd) = mean_sd(xs);
    let n = xs.len() as f64;
    let (mut m3, mut m4) = (0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m3 /= n;
    m4 /= n;
    let (skewness, excess_kurtosis) = if sd > 0.0 {
        (m3 / sd.powi(3), m4 / sd.powi(4) - 3.0)
    } else {
        (0.0, 0.0)
    };
    ColumnSummary {
        name: name.to_string(),
        count: xs.len(),
        mean,
        sd,
        min: s[0],
        q1: quantile_type7(&s, 0.25),
        median: quantile_type7(&s, 0.5),
        q3: quantile_type7(&s, 0.75),
        max: s[s.len() - 1],
        skewness,
        excess_kurtosis,
        normality_p: ks_normality_pvalue(xs),
    }
}

/// Summary of every numeric column, target included. Categorical columns are
/// skipped.
pub fn summarize(ds: &Dataset) -> SummaryStats {
    let columns = ds
        .columns()
        .iter()
        .filter(|c| c.is_numeric() && !c.is_empty())
        .map(|c| summarize_column(&c.name, &c.as_f64()))
        .collect();
    SummaryStats { columns }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tabular::{Column, ProblemType};
    use proptest::prelude::*;

    fn ds_of(cols: Vec<(&str, Vec<f64>)>) -> Dataset {
        let columns = cols.into_iter().map(|(n, v)| Column::numeric(n, v)).collect::<Vec<_>>();
        let t = columns.len() - 1;
        Dataset::new("t", columns, t, ProblemType::Regression).unwrap()
    }

    #[test]
    fn hand_arithmetic() {
        let s = summarize(&ds_of(vec![("a", vec![1.0, 2.0, 3.0, 4.0, 5.0]), ("y", vec![0.0; 5])]));
        let a = s.column("a").unwrap();
        assert_eq!((a.count, a.mean, a.median, a.q1, a.q3), (5, 3.0, 3.0, 2.0, 4.0));
        assert!((a.sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.skewness, 0.0);
        // excess kurtosis of 1..5: m4/m2^2 - 3 = 6.8/4 - 3
        assert!((a.excess_kurtosis - (6.8 / 4.0 - 3.0)).abs() < 1e-12);
        assert_eq!(s.column("y").unwrap().normality_p, None);
    }

    #[test]
    fn type7_quartiles() {
        // numpy.percentile([1, 2, 3, 4], [25, 75]) == [1.75, 3.25]
        assert_eq!(quantile_type7(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile_type7(&[1.0, 2.0, 3.0, 4.0], 0.75), 3.25);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // scipy.special.kolmogorov(1.0), kolmogorov(1.36)
        assert!((kolmogorov_q(1.0) - 0.26999967167735456).abs() < 1e-10);
        assert!((kolmogorov_q(1.36) - 0.049485876755377876).abs() < 1e-10);
    }

    // Pinned against scipy.stats.kstest(x, "norm", args=(mean, sd_pop),
    // method="asymp") after applying the same small-sample λ correction.
    const PINNED_UNIFORM_P: f64 = 0.00041851736488561926;
    const PINNED_NORMAL_P: f64 = 0.4784080524747564;

    fn uniform_sample() -> Vec<f64> {
        let mut r = Rng::stream(1221, "ks-uniform");
        (0..500).map(|_| r.uniform()).collect()
    }

    fn normal_sample() -> Vec<f64> {
        let mut r = Rng::stream(1221, "ks-normal");
        (0..500).map(|_| r.normal()).collect()
    }

    #[test]
    fn normality_rejects_uniform_accepts_normal() {
        let pu = ks_normality_pvalue(&uniform_sample()).unwrap();
        let pn = ks_normality_pvalue(&normal_sample()).unwrap();
        assert!(pu < 0.01, "uniform p = {pu}");
        assert!(pn > 0.05, "normal p = {pn}");
        assert!((pu / PINNED_UNIFORM_P - 1.0).abs() < 1e-8, "{pu}");
        assert!((pn / PINNED_NORMAL_P - 1.0).abs() < 1e-8, "{pn}");
    }

    proptest! {
        #[test]
        fn ordering_invariants(v in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
            let s = summarize(&ds_of(vec![("a", v.clone()), ("y", vec![0.0; v.len()])]));
            let a = s.column("a").unwrap();
            prop_assert!(a.min <= a.q1 && a.q1 <= a.median && a.median <= a.q3 && a.q3 <= a.max);
            prop_assert_eq!(a.count, v.len());
            if v.len() % 2 == 1 {
                let mut sv = v.clone();
                sv.sort_by(f64::total_cmp);
                prop_assert_eq!(a.median, sv[v.len() / 2]);
            }
        }
    }
}
