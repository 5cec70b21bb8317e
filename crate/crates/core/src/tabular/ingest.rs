use super::dataset::{Column, Dataset, ProblemType};
use super::{Result, TabularError};
use log::info;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::Read;

/// Numeric targets with more distinct values than this are treated as regression.
pub const REGRESSION_DISTINCT_THRESHOLD: usize = 10;
pub const MIN_ROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestPolicy {
    /// Fail with the list of offending lines.
    #[default]
    Reject,
    DropRows,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub name: String,
    pub target_name: Option<String>,
    pub problem_hint: Option<ProblemType>,
    pub policy: IngestPolicy,
}

/// What ingestion decided, for the provenance log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub problem_type: ProblemType,
    pub problem_type_inferred: bool,
    pub reason: String,
    pub policy: IngestPolicy,
    pub dropped_rows: Vec<usize>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "N/A" | "NaN" | "nan" | "null" | "NULL" | "None")
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a header-first CSV; the last column (or `target_name`) is the target.
pub fn ingest_csv<R: Read>(source: R, opts: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(source);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(TabularError::EmptyFile),
        Some(r) => r.map_err(|e| TabularError::Csv(e.to_string()))?,
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if header.len() == 1 && header[0].is_empty() {
        return Err(TabularError::EmptyFile);
    }
    if header.len() < 2 {
        return Err(TabularError::TooFewColumns(header.len()));
    }
    let mut seen = HashSet::new();
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(TabularError::EmptyHeader(i));
        }
        if !seen.insert(h.as_str()) {
            return Err(TabularError::DuplicateHeader(h.clone()));
        }
    }

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    let mut missing_lines = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| TabularError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue; // blank line
        }
        if rec.len() != header.len() {
            return Err(TabularError::RaggedRow(line));
        }
        let cells: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
        if cells.iter().any(|c| is_missing(c) || c.parse::<f64>().is_ok_and(|v| !v.is_finite())) {
            missing_lines.push(line);
            continue;
        }
        rows.push((line, cells));
    }
    if !missing_lines.is_empty() && opts.policy == IngestPolicy::Reject {
        return Err(TabularError::MissingCells(missing_lines));
    }
    if rows.len() < MIN_ROWS {
        return Err(TabularError::TooFewRows { min: MIN_ROWS, found: rows.len() });
    }

    let target_pos = match &opts.target_name {
        Some(t) => header.iter().position(|h| h == t).ok_or_else(|| TabularError::UnknownTarget(t.clone()))?,
        None => header.len() - 1,
    };

    let mut columns = Vec::with_capacity(header.len());
    let mut order: Vec<usize> = (0..header.len()).filter(|&j| j != target_pos).collect();
    order.push(target_pos);
    for &j in &order {
        columns.push(build_column(&header[j], rows.iter().map(|(l, r)| (*l, r[j].as_str())))?);
    }

    let target = columns.last().expect("at least two columns");
    let (problem_type, inferred, reason) = match (opts.problem_hint, target.is_numeric()) {
        (Some(p), _) => (p, false, format!("problem type `{p}` given by the user")),
        (None, false) => (
            ProblemType::Classification,
            true,
            format!("target `{}` is categorical", target.name),
        ),
        (None, true) => {
            let distinct = distinct_values(&target.as_f64()).len();
            if distinct > REGRESSION_DISTINCT_THRESHOLD {
                (
                    ProblemType::Regression,
                    true,
                    format!("target `{}` is numeric with {distinct} distinct values", target.name),
                )
            } else {
                (
                    ProblemType::Classification,
                    true,
                    format!(
                        "target `{}` is numeric with only {distinct} distinct values (<= {REGRESSION_DISTINCT_THRESHOLD})",
                        target.name
                    ),
                )
            }
        }
    };
    if problem_type == ProblemType::Classification && target.is_numeric() {
        let t = columns.pop().expect("target column");
        let raw: Vec<&str> = rows.iter().map(|(_, r)| r[target_pos].as_str()).collect();
        columns.push(numeric_to_categorical(&t.name, &t.as_f64(), &raw));
    }
    let target_index = columns.len() - 1;
    info!("ingest `{}`: {reason}", opts.name);
    let ds = Dataset::new(opts.name.clone(), columns, target_index, problem_type)?;
    let report = IngestReport {
        problem_type,
        problem_type_inferred: inferred,
        reason,
        policy: opts.policy,
        dropped_rows: if opts.policy == IngestPolicy::DropRows { missing_lines } else { Vec::new() },
    };
    Ok((ds, report))
}

fn build_column<'a>(name: &str, cells: impl Iterator<Item = (usize, &'a str)> + Clone) -> Result<Column> {
    let first_numeric = cells.clone().next().is_some_and(|(_, c)| parse_finite(c).is_some());
    if first_numeric {
        let mut values = Vec::new();
        for (line, c) in cells {
            values.push(
                parse_finite(c).ok_or_else(|| TabularError::NonNumericCell { col: name.to_string(), line })?,
            );
        }
        Ok(Column::numeric(name, values))
    } else {
        let raw: Vec<&str> = cells.map(|(_, c)| c).collect();
        let mut levels: Vec<String> = raw.iter().map(|s| s.to_string()).collect();
        levels.sort();
        levels.dedup();
        let codes = raw.iter().map(|c| levels.binary_search_by(|l| l.as_str().cmp(c)).unwrap() as u32).collect();
        Ok(Column::categorical(name, levels, codes))
    }
}

fn distinct_values(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Levels ordered by numeric value, labelled by their first textual occurrence.
fn numeric_to_categorical(name: &str, values: &[f64], raw: &[&str]) -> Column {
    let mut labels: BTreeMap<u64, String> = BTreeMap::new();
    let key = |v: f64| (v + 0.0).to_bits();
    for (v, r) in values.iter().zip(raw) {
        labels.entry(key(*v)).or_insert_with(|| r.to_string());
    }
    let distinct = distinct_values(values);
    let levels: Vec<String> = distinct.iter().map(|v| labels[&key(*v)].clone()).collect();
    let codes = values
        .iter()
        .map(|v| distinct.binary_search_by(|d| d.total_cmp(&(v + 0.0))).unwrap() as u32)
        .collect();
    Column::categorical(name, levels, codes)
}
