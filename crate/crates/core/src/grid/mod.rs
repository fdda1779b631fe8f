//! Gridded monthly time series: the data model shared by every index
//! computation and forecasting model in this crate.
//!
//! A [`GridSeries`] is a `T x H x W` stack of monthly frames with a start
//! date and a per-cell validity mask. Row 0 is the northernmost row and
//! column 0 the westernmost column. Cells are either fully observed
//! (finite at every month) or fully missing (`nan` at every month); a mix
//! is rejected, because the Palmer index cannot be computed across gaps.

mod io;
mod norm;
mod split;
mod window;

pub use io::{load_grid_series, load_value_csv, save_grid_series, save_value_csv};
pub use norm::{normalize, NormStats};
pub use split::{temporal_split, SplitSpec};
pub use window::{make_windows, WindowSample};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: {what}")]
    BadBody { line: usize, what: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cell ({row}, {col}) mixes finite and missing values")]
    MixedMissingCell { row: usize, col: usize },
    #[error("non-finite value at valid cell ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },
    #[error("start month {0} outside 1..=12")]
    BadStartMonth(u32),
    #[error("empty dimension: T={t}, H={h}, W={w}")]
    EmptyDimension { t: usize, h: usize, w: usize },
    #[error("invalid split fractions: {0}")]
    BadSplitSpec(String),
    #[error("temporal split produced an empty {0} segment")]
    EmptySegment(&'static str),
    #[error("series too short: T={t} < L+k={need}")]
    TooShort { t: usize, need: usize },
    #[error("series has no valid cells")]
    NoValidCells,
}

/// Calendar month arithmetic: `(year, month)` advanced by `n` months.
pub fn advance_month(year: i32, month: u32, n: usize) -> (i32, u32) {
    let total = (month as i64 - 1) + n as i64;
    (year + (total / 12) as i32, (total % 12) as u32 + 1)
}

/// A single `H x W` grid of values; `nan` marks non-values.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), h * w, "frame data length");
        Frame { h, w, data }
    }

    pub fn filled(h: usize, w: usize, value: f64) -> Self {
        Frame {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.w + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.w + col] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// A `T x H x W` monthly series with validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    values: Vec<f64>,
    t: usize,
    h: usize,
    w: usize,
    start_year: i32,
    start_month: u32,
    mask: Vec<bool>,
}

impl GridSeries {
    /// Builds a series from `t * h * w` values in time-major, row-major
    /// order, deriving the validity mask: a cell that is `nan` at every
    /// month is masked invalid, a cell that is finite at every month is
    /// valid, and anything else is an error.
    pub fn from_values(
        values: Vec<f64>,
        t: usize,
        h: usize,
        w: usize,
        start_year: i32,
        start_month: u32,
    ) -> Result<Self, GridError> {
        if t == 0 || h == 0 || w == 0 {
            return Err(GridError::EmptyDimension { t, h, w });
        }
        if !(1..=12).contains(&start_month) {
            return Err(GridError::BadStartMonth(start_month));
        }
        if values.len() != t * h * w {
            return Err(GridError::DimensionMismatch(format!(
                "expected {} values, got {}",
                t * h * w,
                values.len()
            )));
        }
        let mut mask = vec![false; h * w];
        for row in 0..h {
            for col in 0..w {
                let cell = row * w + col;
                let mut n_finite = 0usize;
                let mut n_nan = 0usize;
                for ti in 0..t {
                    let v = values[ti * h * w + cell];
                    if v.is_finite() {
                        n_finite += 1;
                    } else if v.is_nan() {
                        n_nan += 1;
                    } else {
                        // Infinities are never legal.
                        return Err(GridError::NonFiniteValue { row, col });
                    }
                }
                if n_finite == t {
                    mask[cell] = true;
                } else if n_nan != t {
                    return Err(GridError::MixedMissingCell { row, col });
                }
            }
        }
        Ok(GridSeries {
            values,
            t,
            h,
            w,
            start_year,
            start_month,
            mask,
        })
    }

    pub fn len_t(&self) -> usize {
        self.t
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn start(&self) -> (i32, u32) {
        (self.start_year, self.start_month)
    }

    /// Calendar (year, month) of month index `t`.
    pub fn date_at(&self, t: usize) -> (i32, u32) {
        advance_month(self.start_year, self.start_month, t)
    }

    #[inline]
    pub fn get(&self, t: usize, row: usize, col: usize) -> f64 {
        self.values[(t * self.h + row) * self.w + col]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.w + col]
    }

    /// Validity mask in row-major order.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn n_valid_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// All values, time-major then row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `H x W` slice of month `t`.
    pub fn frame_values(&self, t: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.values[t * n..(t + 1) * n]
    }

    pub fn frame(&self, t: usize) -> Frame {
        Frame::new(self.h, self.w, self.frame_values(t).to_vec())
    }

    /// The full monthly series of one cell.
    pub fn cell_series(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.t).map(|t| self.get(t, row, col)).collect()
    }

    /// Two series cover the same grid, span, and start date.
    pub fn same_layout(&self, other: &GridSeries) -> bool {
        self.t == other.t
            && self.h == other.h
            && self.w == other.w
            && self.start() == other.start()
    }
}
