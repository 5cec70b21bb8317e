use super::{Result, StatsError};
use serde::{Deserialize, Serialize};

pub const PLOT_SPEC_VERSION: u32 = 1;

/// Figure-wide appearance settings shared by every plot of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotOptions {
    /// inches
    pub width: f64,
    /// inches
    pub height: f64,
    pub dpi: u32,
    pub x_label_rotation: f64,
    pub y_label_rotation: f64,
    pub title_font_size: f64,
    pub axis_font_size: f64,
    pub tick_size: f64,
    pub colour_scheme: String,
    pub colour_map: String,
    pub font_family: String,
    pub save_all: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            width: 10.0,
            height: 10.0,
            dpi: 330,
            x_label_rotation: 45.0,
            y_label_rotation: 0.0,
            title_font_size: 16.0,
            axis_font_size: 12.0,
            tick_size: 10.0,
            colour_scheme: "seaborn-v0_8-whitegrid".into(),
            colour_map: "viridis".into(),
            font_family: "sans-serif".into(),
            save_all: true,
        }
    }
}

impl PlotOptions {
    pub fn validate(&self) -> Result<()> {
        if self.dpi < 72 {
            return Err(StatsError::Malformed(format!("dpi {} is below 72", self.dpi)));
        }
        for (name, v) in [
            ("width", self.width),
            ("height", self.height),
            ("title_font_size", self.title_font_size),
            ("axis_font_size", self.axis_font_size),
            ("tick_size", self.tick_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StatsError::Malformed(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Histogram,
    Heatmap,
    ScatterGrid,
    Scatter2d,
    Parity,
    Bar,
    RocCurve,
    Box,
}

impl PlotKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlotKind::Histogram => "histogram",
            PlotKind::Heatmap => "heatmap",
            PlotKind::ScatterGrid => "scatter_grid",
            PlotKind::Scatter2d => "scatter2d",
            PlotKind::Parity => "parity",
            PlotKind::Bar => "bar",
            PlotKind::RocCurve => "roc_curve",
            PlotKind::Box => "box",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeriesData {
    Vector { values: Vec<f64> },
    Matrix { rows: usize, cols: usize, values: Vec<f64> },
    Labels { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    #[serde(flatten)]
    pub data: SeriesData,
}

impl Series {
    pub fn vector(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), data: SeriesData::Vector { values } }
    }

    pub fn matrix(name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) -> Self {
        Self { name: name.into(), data: SeriesData::Matrix { rows, cols, values } }
    }

    pub fn labels(name: impl Into<String>, values: Vec<String>) -> Self {
        Self { name: name.into(), data: SeriesData::Labels { values } }
    }

    pub fn numbers(&self) -> Option<&[f64]> {
        match &self.data {
            SeriesData::Vector { values } | SeriesData::Matrix { values, .. } => Some(values),
            SeriesData::Labels { .. } => None,
        }
    }

    pub fn strings(&self) -> Option<&[String]> {
        match &self.data {
            SeriesData::Labels { values } => Some(values),
            _ => None,
        }
    }

    fn len(&self) -> usize {
        match &self.data {
            SeriesData::Vector { values } | SeriesData::Matrix { values, .. } => values.len(),
            SeriesData::Labels { values } => values.len(),
        }
    }
}

/// One cell of a grid plot: which columns it shows and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub row: usize,
    pub col: usize,
    /// `histogram` on the diagonal, `scatter` elsewhere.
    pub kind: String,
    pub x: String,
    pub y: String,
}

/// Self-describing plot: a renderer needs nothing else to draw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub version: u32,
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub panels: Vec<Panel>,
    pub options: PlotOptions,
    pub provenance_id: String,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            version: PLOT_SPEC_VERSION,
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            panels: Vec::new(),
            options: PlotOptions::default(),
            provenance_id: String::new(),
        }
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn with_options(mut self, options: &PlotOptions) -> Self {
        self.options = options.clone();
        self
    }

    pub fn with_provenance(mut self, id: impl Into<String>) -> Self {
        self.provenance_id = id.into();
        self
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// `<plot_kind>_<provenance_id>.svg`
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.kind.as_str(), self.provenance_id)
    }

    pub fn validate(&self) -> Result<()> {
        self.options.validate()?;
        if self.series.is_empty() {
            return Err(StatsError::EmptySeries(self.title.clone()));
        }
        for s in &self.series {
            if s.len() == 0 {
                return Err(StatsError::EmptySeries(format!("{}: {}", self.title, s.name)));
            }
            if let SeriesData::Matrix { rows, cols, values } = &s.data {
                if rows * cols != values.len() {
                    return Err(StatsError::Malformed(format!("matrix `{}` has the wrong size", s.name)));
                }
            }
            if s.numbers().is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(StatsError::NonFinite(format!("{}: {}", self.title, s.name)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plot specs serialise")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| StatsError::Malformed(e.to_string()))
    }
}
