use super::{argmax_set, fuzzify, FuzzyError, FuzzySet, Result};
use crate::interpret::{ImportanceTensor, Scope};
use crate::matrix::Matrix;
use crate::tabular::format_f64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

pub const NO_RULES: &str = "no rules met the support threshold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzyConfig {
    /// Local method whose importances gate the antecedents: "shap" or "lime".
    pub source: String,
    /// Explicit feature choice; otherwise the top `top_features` by crisp rank.
    pub features: Option<Vec<String>>,
    pub top_features: usize,
    pub importance_threshold: f64,
    pub min_support: usize,
    pub top_rules: usize,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self { source: "shap".into(), features: None, top_features: 3, importance_threshold: 0.5, min_support: 1, top_rules: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Consequent {
    Set(FuzzySet),
    Class(String),
}

impl std::fmt::Display for Consequent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Consequent::Set(s) => write!(f, "{s}"),
            Consequent::Class(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticRule {
    pub antecedent: Vec<(String, FuzzySet)>,
    pub target: String,
    pub consequent: Consequent,
    pub support: usize,
    pub confidence: f64,
    /// Mean |local importance| of the antecedent features over supporting rows.
    pub mean_importance: f64,
}

impl LinguisticRule {
    pub fn text(&self) -> String {
        let parts: Vec<String> = self.antecedent.iter().map(|(f, s)| format!("{f} is {s}")).collect();
        format!("IF {} THEN {} is {}", parts.join(" AND "), self.target, self.consequent)
    }
}

/// Raw data the rules are phrased over, in original units. Row indices of
/// `x` match the `instance` field of local slices.
pub struct RuleInput<'a> {
    pub features: &'a [String],
    pub x: &'a Matrix,
    pub target: &'a [f64],
    pub target_name: &'a str,
    pub class_labels: Option<&'a [String]>,
}

/// Constant columns have no spread to partition; they read as MEDIUM.
fn label(v: f64, min: f64, max: f64) -> FuzzySet {
    match fuzzify(v, min, max) {
        Ok(m) => argmax_set(&m),
        Err(_) => FuzzySet::Medium,
    }
}

fn range(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

type RuleKey = (Vec<(usize, FuzzySet)>, Consequent);

/// Per-instance crisp rules aggregated into support and confidence. Local
/// importances from several models are averaged (in absolute value) per row.
pub fn extract_rules(local: &ImportanceTensor, input: &RuleInput, config: &FuzzyConfig, crisp: Option<&[f64]>) -> Result<Vec<LinguisticRule>> {
    if !(0.0..=1.0).contains(&config.importance_threshold) {
        return Err(FuzzyError::InvalidConfig("importance_threshold must lie in [0, 1]".into()));
    }
    let d = input.features.len();
    let mut per_row: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    if local.scope == Scope::Local {
        for s in local.slices.iter().filter(|s| s.method == config.source) {
            if let Some(i) = s.instance {
                let e = per_row.entry(i).or_insert_with(|| (vec![0.0; d], 0));
                e.0.iter_mut().zip(&s.values).for_each(|(a, v)| *a += v.abs());
                e.1 += 1;
            }
        }
    }
    if per_row.is_empty() {
        return Err(FuzzyError::NoLocalImportances(config.source.clone()));
    }
    for (v, c) in per_row.values_mut() {
        v.iter_mut().for_each(|a| *a /= *c as f64);
    }

    let selected: Vec<usize> = match &config.features {
        Some(names) => names
            .iter()
            .map(|n| input.features.iter().position(|f| f == n).ok_or_else(|| FuzzyError::UnknownFeature(n.clone())))
            .collect::<Result<_>>()?,
        None => {
            let score: Vec<f64> = match crisp {
                Some(c) => c.iter().map(|v| v.abs()).collect(),
                None => (0..d).map(|j| per_row.values().map(|(v, _)| v[j]).sum()).collect(),
            };
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
            idx.truncate(config.top_features.max(1));
            idx.sort_unstable();
            idx
        }
    };
    if selected.is_empty() {
        return Err(FuzzyError::InvalidConfig("no features selected".into()));
    }
    let ranges: Vec<(f64, f64)> = (0..d).map(|j| range(&input.x.column(j))).collect();
    let (tmin, tmax) = range(input.target);

    let mut counts: BTreeMap<RuleKey, (usize, f64)> = BTreeMap::new();
    let mut antecedent_counts: BTreeMap<Vec<(usize, FuzzySet)>, usize> = BTreeMap::new();
    for (&i, (imp, _)) in &per_row {
        let top = selected.iter().map(|&j| imp[j]).fold(0.0, f64::max);
        let ante: Vec<(usize, FuzzySet)> = selected
            .iter()
            .filter(|&&j| imp[j] >= config.importance_threshold * top)
            .map(|&j| (j, label(input.x.get(i, j), ranges[j].0, ranges[j].1)))
            .collect();
        let y = input.target[i];
        let cons = match input.class_labels {
            Some(l) => Consequent::Class(l.get(y as usize).cloned().unwrap_or_else(|| format_f64(y))),
            None => Consequent::Set(label(y, tmin, tmax)),
        };
        let mean_imp = ante.iter().map(|(j, _)| imp[*j]).sum::<f64>() / ante.len() as f64;
        *antecedent_counts.entry(ante.clone()).or_default() += 1;
        let e = counts.entry((ante, cons)).or_default();
        e.0 += 1;
        e.1 += mean_imp;
    }

    let mut rules: Vec<LinguisticRule> = counts
        .into_iter()
        .filter(|(_, (support, _))| *support >= config.min_support.max(1))
        .map(|((ante, cons), (support, imp_sum))| LinguisticRule {
            confidence: support as f64 / antecedent_counts[&ante] as f64,
            antecedent: ante.iter().map(|(j, s)| (input.features[*j].clone(), *s)).collect(),
            target: input.target_name.to_string(),
            consequent: cons,
            support,
            mean_importance: imp_sum / support as f64,
        })
        .collect();
    if rules.is_empty() {
        return Err(FuzzyError::NoRulesAboveSupport(config.min_support));
    }
    rules.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(b.confidence.total_cmp(&a.confidence))
            .then(b.mean_importance.total_cmp(&a.mean_importance))
            .then_with(|| a.text().cmp(&b.text()))
    });
    Ok(rules)
}

/// One line per rule, best first.
pub fn render_rules(rules: &[LinguisticRule], top_r: usize) -> String {
    if rules.is_empty() {
        return format!("{NO_RULES}\n");
    }
    let mut out = String::new();
    for r in rules.iter().take(top_r) {
        writeln!(out, "{} (support {}, confidence {:.3})", r.text(), r.support, r.confidence).expect("string write");
    }
    out
}

pub fn rules_csv(rules: &[LinguisticRule]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["antecedent", "consequent", "support", "confidence", "mean_importance"]).expect("in-memory write");
    for r in rules {
        let ante: Vec<String> = r.antecedent.iter().map(|(f, s)| format!("{f} is {s}")).collect();
        w.write_record([
            ante.join(" AND "),
            format!("{} is {}", r.target, r.consequent),
            r.support.to_string(),
            format_f64(r.confidence),
            format_f64(r.mean_importance),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}
