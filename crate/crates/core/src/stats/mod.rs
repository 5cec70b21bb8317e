//! Descriptive statistics, normality testing, t-SNE and renderer-independent
//! plot specifications with a deterministic SVG backend.

mod charts;
mod plot;
mod summary;
mod svg;
mod tsne;

pub use charts::{correlation_heatmap, correlation_matrix, distribution_plot, histogram_bins, pairplot};
pub use plot::{Panel, PlotKind, PlotOptions, PlotSpec, Series, SeriesData, PLOT_SPEC_VERSION};
pub use summary::{ks_normality_pvalue, quantile_type7, summarize, ColumnSummary, SummaryStats};
pub use svg::render_svg;
pub use tsne::{conditional_entropies_bits, tsne_embed, tsne_plot, TsneOptions, TsneResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("at least {needed} numeric columns are required, found {found}")]
    TooFewColumns { needed: usize, found: usize },
    #[error("unknown or non-numeric column `{0}`")]
    UnknownColumn(String),
    #[error("perplexity {perplexity} exceeds (n - 1) / 3 = {max}")]
    PerplexityTooLarge { perplexity: f64, max: f64 },
    #[error("perplexity {0} is below the minimum of 5")]
    PerplexityTooSmall(f64),
    #[error("t-SNE on {0} points exceeds the exact-method limit of 5000")]
    TooManyPoints(usize),
    #[error("all points are identical")]
    DegenerateDistances,
    #[error("plot `{0}` has an empty series")]
    EmptySeries(String),
    #[error("plot `{0}` contains a non-finite number")]
    NonFinite(String),
    #[error("plot kind `{0}` is not supported by this renderer")]
    UnsupportedKind(String),
    #[error("malformed plot spec: {0}")]
    Malformed(String),
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;
