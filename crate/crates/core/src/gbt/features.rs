//! Lagged-feature construction for per-cell time-series regression.
//!
//! A row describes one forecast origin `t`: the cell's own last `p`
//! values, and in the spatial variant the same `p` lags of each 3x3
//! neighbor. Neighbors beyond the grid edge (or masked invalid) are
//! all-zero columns.

use super::GbtError;
use crate::grid::GridSeries;

/// The eight neighbor offsets in column order: `(d_row, d_col)`.
pub const NEIGHBOR_DIRECTIONS: [(&str, isize, isize); 8] = [
    ("NW", -1, -1),
    ("N", -1, 0),
    ("NE", -1, 1),
    ("W", 0, -1),
    ("E", 0, 1),
    ("SW", 1, -1),
    ("S", 1, 0),
    ("SE", 1, 1),
];

/// Row-major design matrix with aligned targets.
///
/// Column `lag_j` holds the value `j - 1` months before the window end;
/// `nbr_{d}_lag_j` the same lag of neighbor `d`.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
    pub col_names: Vec<String>,
    pub targets: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i)[j]).collect()
    }
}

fn check_cell(gs: &GridSeries, row: usize, col: usize) -> Result<(), GbtError> {
    if !gs.is_valid(row, col) {
        return Err(GbtError::MaskedCell { row, col });
    }
    Ok(())
}

fn check_length(gs: &GridSeries, lags: usize, horizon: usize) -> Result<(), GbtError> {
    let need = lags + horizon;
    if gs.len_t() < need {
        return Err(GbtError::InsufficientLength {
            t: gs.len_t(),
            need,
        });
    }
    Ok(())
}

/// One feature row for the window ending at month `t` (own lags, plus
/// neighbor lags when `spatial`). Zero for out-of-grid or invalid
/// neighbors.
pub fn feature_row(
    gs: &GridSeries,
    row: usize,
    col: usize,
    t: usize,
    lags: usize,
    spatial: bool,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(if spatial { 9 * lags } else { lags });
    for j in 0..lags {
        out.push(gs.get(t - j, row, col));
    }
    if spatial {
        for &(_, dr, dc) in &NEIGHBOR_DIRECTIONS {
            let nr = row as isize + dr;
            let nc = col as isize + dc;
            let in_grid = nr >= 0
                && nr < gs.height() as isize
                && nc >= 0
                && nc < gs.width() as isize
                && gs.is_valid(nr as usize, nc as usize);
            for j in 0..lags {
                out.push(if in_grid {
                    gs.get(t - j, nr as usize, nc as usize)
                } else {
                    0.0
                });
            }
        }
    }
    out
}

fn build(
    gs: &GridSeries,
    cell: (usize, usize),
    lags: usize,
    horizon: usize,
    spatial: bool,
) -> Result<FeatureMatrix, GbtError> {
    assert!(lags >= 1 && horizon >= 1);
    let (row, col) = cell;
    check_cell(gs, row, col)?;
    check_length(gs, lags, horizon)?;

    let mut col_names = Vec::new();
    for j in 1..=lags {
        col_names.push(format!("lag_{j}"));
    }
    if spatial {
        for &(d, _, _) in &NEIGHBOR_DIRECTIONS {
            for j in 1..=lags {
                col_names.push(format!("nbr_{d}_lag_{j}"));
            }
        }
    }
    let n_cols = col_names.len();

    let t_max = gs.len_t() - 1 - horizon;
    let mut data = Vec::new();
    let mut targets = Vec::new();
    for t in (lags - 1)..=t_max {
        data.extend(feature_row(gs, row, col, t, lags, spatial));
        targets.push(gs.get(t + horizon, row, col));
    }
    if data.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
        return Err(GbtError::NonFinite("feature matrix"));
    }
    Ok(FeatureMatrix {
        n_rows: targets.len(),
        n_cols,
        data,
        col_names,
        targets,
    })
}

/// Own-cell lags only: one row per admissible origin, `lags` columns.
pub fn build_features_pointwise(
    gs: &GridSeries,
    cell: (usize, usize),
    lags: usize,
    horizon: usize,
) -> Result<FeatureMatrix, GbtError> {
    build(gs, cell, lags, horizon, false)
}

/// Own-cell lags plus the eight neighbor series: `9 * lags` columns.
pub fn build_features_spatial(
    gs: &GridSeries,
    cell: (usize, usize),
    lags: usize,
    horizon: usize,
) -> Result<FeatureMatrix, GbtError> {
    build(gs, cell, lags, horizon, true)
}
