use super::layout::{list_files, write_atomic, LEAF_DIRS, RAW_DIGEST};
use super::store::Experiment;
use super::{io_err, ProvenanceError, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::path::Path;

/// Relative tolerance for numeric cells.
pub const REL_TOL: f64 = 1e-12;
/// Compared trees; logs are excluded (timestamps).
const COMPARED: [&str; 5] = ["data", "models", "results", "plots", "options"];
/// JSON keys that record wall-clock time.
const VOLATILE_KEYS: [&str; 1] = ["created_at"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Difference {
    pub path: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub compared: usize,
    pub differences: Vec<Difference>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.differences.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_clean() {
            Ok(self)
        } else {
            Err(ProvenanceError::ReplayDivergence(self.differences.iter().map(|d| d.path.clone()).collect()))
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan()) || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn cell_equal(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => close(x, y),
        _ => false,
    }
}

fn diff_csv(a: &[u8], b: &[u8]) -> Option<String> {
    let rows = |bytes: &[u8]| -> Vec<Vec<String>> {
        csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(bytes)
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).unwrap_or_default())
            .collect()
    };
    let (ra, rb) = (rows(a), rows(b));
    if ra.len() != rb.len() {
        return Some(format!("{} rows vs {}", ra.len(), rb.len()));
    }
    for (i, (x, y)) in ra.iter().zip(&rb).enumerate() {
        if x.len() != y.len() {
            return Some(format!("row {} has {} cells vs {}", i + 1, x.len(), y.len()));
        }
        for (j, (p, q)) in x.iter().zip(y).enumerate() {
            if !cell_equal(p, q) {
                return Some(format!("row {} column {}: {p} vs {q}", i + 1, j + 1));
            }
        }
    }
    None
}

fn diff_value(path: &str, a: &Value, b: &Value) -> Option<String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            (!close(x, y)).then(|| format!("{path}: {x} vs {y}"))
        }
        (Value::Object(x), Value::Object(y)) => {
            let keys: std::collections::BTreeSet<&String> = x.keys().chain(y.keys()).collect();
            keys.into_iter().filter(|k| !VOLATILE_KEYS.contains(&k.as_str())).find_map(|k| match (x.get(k), y.get(k)) {
                (Some(p), Some(q)) => diff_value(&format!("{path}.{k}"), p, q),
                _ => Some(format!("{path}.{k} present on one side only")),
            })
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Some(format!("{path}: length {} vs {}", x.len(), y.len()));
            }
            x.iter().zip(y).enumerate().find_map(|(i, (p, q))| diff_value(&format!("{path}[{i}]"), p, q))
        }
        _ => (a != b).then(|| format!("{path}: {a} vs {b}")),
    }
}

fn diff_file(rel: &Path, a: &[u8], b: &[u8]) -> Option<String> {
    match rel.extension().and_then(|e| e.to_str()) {
        Some("csv") => diff_csv(a, b),
        Some("json") => match (serde_json::from_slice::<Value>(a), serde_json::from_slice::<Value>(b)) {
            (Ok(x), Ok(y)) => diff_value("$", &x, &y),
            _ => (a != b).then(|| "unparseable JSON differs".to_string()),
        },
        // svg, txt, logs of record: byte-exact
        _ => (a != b).then(|| "bytes differ".to_string()),
    }
}

/// Compares two experiment trees: CSV cells and JSON numbers at 1e-12
/// relative, wall-clock keys ignored, everything else byte for byte.
pub fn diff_trees(original: &Path, replayed: &Path) -> Result<ReplayReport> {
    let mut differences = Vec::new();
    let mut compared = 0;
    for dir in COMPARED {
        let (fa, fb) = (list_files(&original.join(dir))?, list_files(&replayed.join(dir))?);
        let mut all: Vec<_> = fa.iter().chain(&fb).cloned().collect();
        all.sort();
        all.dedup();
        for rel in all {
            let path = format!("{dir}/{}", rel.display());
            let (pa, pb) = (original.join(dir).join(&rel), replayed.join(dir).join(&rel));
            match (pa.is_file(), pb.is_file()) {
                (true, false) => differences.push(Difference { path, detail: "not produced by replay".into() }),
                (false, true) => differences.push(Difference { path, detail: "only produced by replay".into() }),
                _ => {
                    compared += 1;
                    let a = fs::read(&pa).map_err(|e| io_err(&pa, e))?;
                    let b = fs::read(&pb).map_err(|e| io_err(&pb, e))?;
                    if let Some(detail) = diff_file(&rel, &a, &b) {
                        differences.push(Difference { path, detail });
                    }
                }
            }
        }
    }
    Ok(ReplayReport { compared, differences })
}

pub(crate) fn replay(exp: &Experiment, seed: Option<u64>) -> Result<ReplayReport> {
    let shadow = tempfile::Builder::new().prefix("helixforge-replay-").tempdir().map_err(|e| io_err(Path::new("<tempdir>"), e))?;
    let root = shadow.path().join(exp.name());
    for d in LEAF_DIRS {
        fs::create_dir_all(root.join(d)).map_err(|e| io_err(&root, e))?;
    }
    let record = exp.record();
    for rel in ["options/execution.json", "options/data.json", "options/plotting.json", record.data.data_path.as_str(), RAW_DIGEST] {
        let src = exp.root().join(rel);
        let bytes = fs::read(&src).map_err(|e| io_err(&src, e))?;
        write_atomic(&root.join(rel), &bytes)?;
    }
    let mut shadow_exp = Experiment::load(&root)?;
    if let Some(s) = seed {
        shadow_exp.set_seed(s)?;
    }
    if let Some(p) = &record.preprocessing {
        shadow_exp.preprocess(p.clone())?;
    }
    if !list_files(&exp.root().join("plots/data"))?.is_empty() {
        shadow_exp.visualise(None)?;
    }
    if let Some(m) = &record.ml {
        shadow_exp.train(m.clone())?;
    }
    if let Some(f) = &record.fi {
        shadow_exp.interpret(f.clone())?;
    }
    diff_trees(exp.root(), &root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerant_cells_and_json() {
        assert!(diff_csv(b"a,b\n1.0,x\n", b"a,b\n1.0000000000001,x\n").is_none());
        assert!(diff_csv(b"a\n1.0\n", b"a\n1.00001\n").is_some());
        assert!(diff_csv(b"a\nx\n", b"a\ny\n").is_some());
        let a = serde_json::json!({"created_at": "2024", "v": [1.0, 2.0]});
        let b = serde_json::json!({"created_at": "2025", "v": [1.0, 2.0000000000000004]});
        assert!(diff_value("$", &a, &b).is_none());
        let c = serde_json::json!({"v": [1.0, 2.5]});
        assert_eq!(diff_value("$", &a, &c).unwrap(), "$.v[1]: 2 vs 2.5");
    }
}
