use super::{Result, TabularError};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemType {
    Classification,
    Regression,
}

impl std::fmt::Display for ProblemType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemType::Classification => "classification",
            ProblemType::Regression => "regression",
        })
    }
}

impl std::str::FromStr for ProblemType {
    type Err = TabularError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classification" => Ok(Self::Classification),
            "regression" => Ok(Self::Regression),
            other => Err(TabularError::InvalidProblemType(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnValues {
    Numeric { values: Vec<f64>, min: f64, max: f64 },
    /// Label-indexed; `codes[i]` indexes `levels`.
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: ColumnValues,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Self { name: name.into(), values: ColumnValues::Numeric { values, min, max } }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>, codes: Vec<u32>) -> Self {
        debug_assert!(codes.iter().all(|&c| (c as usize) < levels.len()));
        Self { name: name.into(), values: ColumnValues::Categorical { levels, codes } }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            ColumnValues::Numeric { values, .. } => values.len(),
            ColumnValues::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.values, ColumnValues::Numeric { .. })
    }

    /// Numeric view: values for numeric columns, level codes otherwise.
    pub fn as_f64(&self) -> Vec<f64> {
        match &self.values {
            ColumnValues::Numeric { values, .. } => values.clone(),
            ColumnValues::Categorical { codes, .. } => codes.iter().map(|&c| c as f64).collect(),
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.values {
            ColumnValues::Categorical { levels, .. } => Some(levels),
            ColumnValues::Numeric { .. } => None,
        }
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        match &self.values {
            ColumnValues::Numeric { min, max, .. } => Some((*min, *max)),
            ColumnValues::Categorical { .. } => None,
        }
    }

    fn cell(&self, i: usize) -> String {
        match &self.values {
            ColumnValues::Numeric { values, .. } => format_f64(values[i]),
            ColumnValues::Categorical { levels, codes } => levels[codes[i] as usize].clone(),
        }
    }

    fn select(&self, idx: &[usize]) -> Column {
        match &self.values {
            ColumnValues::Numeric { values, .. } => {
                Column::numeric(self.name.clone(), idx.iter().map(|&i| values[i]).collect())
            }
            ColumnValues::Categorical { levels, codes } => Column::categorical(
                self.name.clone(),
                levels.clone(),
                idx.iter().map(|&i| codes[i]).collect(),
            ),
        }
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Immutable column-oriented table whose target is one of the columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    columns: Vec<Column>,
    n_rows: usize,
    target_index: usize,
    problem_type: ProblemType,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        target_index: usize,
        problem_type: ProblemType,
    ) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(TabularError::Csv("columns have different lengths".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, c) in columns.iter().enumerate() {
            if c.name.is_empty() {
                return Err(TabularError::EmptyHeader(i));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(TabularError::DuplicateHeader(c.name.clone()));
            }
        }
        if target_index >= columns.len() {
            return Err(TabularError::UnknownTarget(target_index.to_string()));
        }
        let target = &columns[target_index];
        match problem_type {
            ProblemType::Regression if !target.is_numeric() => {
                return Err(TabularError::InvalidProblemType(
                    "regression requires a numeric target".into(),
                ))
            }
            ProblemType::Classification => {
                let n_levels = target.levels().map_or(0, <[String]>::len);
                if n_levels < 2 {
                    return Err(TabularError::InvalidProblemType(
                        "classification requires a categorical target with at least 2 levels".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self { name: name.into(), columns, n_rows, target_index, problem_type })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn problem_type(&self) -> ProblemType {
        self.problem_type
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_column(&self) -> &Column {
        &self.columns[self.target_index]
    }

    pub fn target_name(&self) -> &str {
        &self.columns[self.target_index].name
    }

    /// Target as numbers: values for regression, class codes for classification.
    pub fn target(&self) -> Vec<f64> {
        self.target_column().as_f64()
    }

    pub fn class_labels(&self) -> Option<&[String]> {
        match self.problem_type {
            ProblemType::Classification => self.target_column().levels(),
            ProblemType::Regression => None,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels().map_or(0, <[String]>::len)
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().enumerate().filter(move |(i, _)| *i != self.target_index).map(|(_, c)| c)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_columns().map(|c| c.name.clone()).collect()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Feature matrix (n_rows × n_features), categorical features as codes.
    pub fn features(&self) -> Matrix {
        let cols: Vec<Vec<f64>> = self.feature_columns().map(Column::as_f64).collect();
        if cols.is_empty() {
            return Matrix::zeros(self.n_rows, 0);
        }
        Matrix::from_columns(&cols)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            n_rows: idx.len(),
            target_index: self.target_index,
            problem_type: self.problem_type,
        }
    }

    /// Keeps the named features (in the given order) followed by the target.
    pub fn with_features(&self, names: &[String]) -> Result<Dataset> {
        let mut cols = Vec::with_capacity(names.len() + 1);
        for n in names {
            let c = self
                .feature_columns()
                .find(|c| &c.name == n)
                .ok_or_else(|| TabularError::UnknownColumn(n.clone()))?;
            cols.push(c.clone());
        }
        cols.push(self.target_column().clone());
        let t = cols.len() - 1;
        Dataset::new(self.name.clone(), cols, t, self.problem_type)
    }

    /// Replaces the feature block with `x` (columns named by `names`) and
    /// the numeric target with `y`, keeping everything else.
    pub fn with_numeric_data(&self, names: &[String], x: &Matrix, y: Option<&[f64]>) -> Result<Dataset> {
        let mut cols: Vec<Column> =
            names.iter().enumerate().map(|(j, n)| Column::numeric(n.clone(), x.column(j))).collect();
        let target = match (y, &self.target_column().values) {
            (Some(y), ColumnValues::Numeric { .. }) => Column::numeric(self.target_name(), y.to_vec()),
            _ => self.target_column().clone(),
        };
        cols.push(target);
        let t = cols.len() - 1;
        Dataset::new(self.name.clone(), cols, t, self.problem_type)
    }

    /// RFC 4180 output with full round-trip precision.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let map = |e: csv::Error| TabularError::Csv(e.to_string());
        wr.write_record(self.columns.iter().map(|c| c.name.as_str())).map_err(map)?;
        for i in 0..self.n_rows {
            wr.write_record(self.columns.iter().map(|c| c.cell(i))).map_err(map)?;
        }
        wr.flush().map_err(|e| TabularError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}
