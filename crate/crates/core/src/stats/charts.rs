use super::plot::{Panel, PlotKind, PlotSpec, Series};
use super::summary::quantile_type7;
use super::{Result, StatsError};
use crate::matrix::pearson;
use crate::tabular::Dataset;

fn numeric_columns(ds: &Dataset) -> Vec<(String, Vec<f64>)> {
    ds.columns()
        .iter()
        .filter(|c| c.is_numeric())
        .map(|c| (c.name.clone(), c.as_f64()))
        .collect()
}

/// Pearson matrix, row-major. A constant column correlates 0 with others
/// and 1 with itself.
pub fn correlation_matrix(cols: &[Vec<f64>]) -> Vec<f64> {
    let k = cols.len();
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&cols[i], &cols[j]).unwrap_or(0.0).clamp(-1.0, 1.0);
            m[i * k + j] = r;
            m[j * k + i] = r;
        }
    }
    m
}

pub fn correlation_heatmap(ds: &Dataset) -> Result<PlotSpec> {
    let cols = numeric_columns(ds);
    if cols.len() < 2 {
        return Err(StatsError::TooFewColumns { needed: 2, found: cols.len() });
    }
    let k = cols.len();
    let (names, values): (Vec<String>, Vec<Vec<f64>>) = cols.into_iter().unzip();
    Ok(PlotSpec::new(PlotKind::Heatmap, format!("Correlation heatmap: {}", ds.name), "", "")
        .with_series(Series::matrix("correlation", k, k, correlation_matrix(&values)))
        .with_series(Series::labels("labels", names)))
}

/// Freedman–Diaconis edges; √n bins when the IQR or range vanishes.
pub fn histogram_bins(xs: &[f64]) -> Vec<f64> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let (lo, hi) = (s[0], s[n - 1]);
    let iqr = quantile_type7(&s, 0.75) - quantile_type7(&s, 0.25);
    let sqrt_bins = ((n as f64).sqrt().ceil() as usize).max(1);
    let bins = if iqr > 0.0 && hi > lo {
        let h = 2.0 * iqr / (n as f64).cbrt();
        (((hi - lo) / h).ceil() as usize).max(1)
    } else {
        sqrt_bins
    };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let w = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|b| lo + b as f64 * w).collect();
    edges.push(hi);
    edges
}

fn histogram_counts(xs: &[f64], edges: &[f64]) -> Vec<f64> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0.0; bins];
    for &x in xs {
        let b = if x >= hi { bins - 1 } else { (((x - lo) / (hi - lo)) * bins as f64).floor() as usize };
        counts[b.min(bins - 1)] += 1.0;
    }
    counts
}

pub fn distribution_plot(ds: &Dataset, column: &str) -> Result<PlotSpec> {
    let col = ds
        .column(column)
        .filter(|c| c.is_numeric())
        .ok_or_else(|| StatsError::UnknownColumn(column.to_string()))?;
    let xs = col.as_f64();
    if xs.is_empty() {
        return Err(StatsError::EmptySeries(column.to_string()));
    }
    let edges = histogram_bins(&xs);
    let counts = histogram_counts(&xs, &edges);
    Ok(PlotSpec::new(PlotKind::Histogram, format!("Distribution of {column}"), column, "count")
        .with_series(Series::vector("edges", edges))
        .with_series(Series::vector("counts", counts)))
}

/// k×k grid: histograms on the diagonal, scatters elsewhere. Each column is
/// stored once as a series named after it.
pub fn pairplot(ds: &Dataset, columns: &[String]) -> Result<PlotSpec> {
    if columns.len() < 2 {
        return Err(StatsError::TooFewColumns { needed: 2, found: columns.len() });
    }
    let mut spec = PlotSpec::new(PlotKind::ScatterGrid, format!("Pairplot: {}", ds.name), "", "");
    for name in columns {
        let col = ds
            .column(name)
            .filter(|c| c.is_numeric())
            .ok_or_else(|| StatsError::UnknownColumn(name.clone()))?;
        spec.series.push(Series::vector(name.clone(), col.as_f64()));
    }
    for (i, yi) in columns.iter().enumerate() {
        for (j, xj) in columns.iter().enumerate() {
            spec.panels.push(Panel {
                row: i,
                col: j,
                kind: if i == j { "histogram" } else { "scatter" }.into(),
                x: xj.clone(),
                y: yi.clone(),
            });
        }
    }
    Ok(spec)
}
