//! Mean/std normalization over valid cells. Statistics are intended to be
//! computed on the training split and then applied to the other splits,
//! so no information leaks backward in time.

use super::{GridError, GridSeries};

/// Normalization statistics; `std` is the divisor (1 when the source had
/// zero variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    /// Applies `(v - mean) / std` to every valid cell of `gs`.
    pub fn apply(&self, gs: &GridSeries) -> GridSeries {
        self.map(gs, |v| (v - self.mean) / self.std)
    }

    /// Inverts [`NormStats::apply`].
    pub fn invert(&self, gs: &GridSeries) -> GridSeries {
        self.map(gs, |v| v * self.std + self.mean)
    }

    pub fn denorm_value(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }

    fn map(&self, gs: &GridSeries, f: impl Fn(f64) -> f64) -> GridSeries {
        let values = gs
            .values()
            .iter()
            .map(|&v| if v.is_finite() { f(v) } else { v })
            .collect();
        let (year, month) = gs.start();
        GridSeries::from_values(values, gs.len_t(), gs.height(), gs.width(), year, month)
            .expect("affine map preserves validity")
    }
}

/// Normalizes a series by the mean and population standard deviation of
/// its own valid cells; zero variance maps to divisor 1.
pub fn normalize(gs: &GridSeries) -> Result<(GridSeries, NormStats), GridError> {
    if gs.n_valid_cells() == 0 {
        return Err(GridError::NoValidCells);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for &v in gs.values() {
        if v.is_finite() {
            sum += v;
            n += 1;
        }
    }
    let mean = sum / n as f64;
    let mut sq = 0.0;
    for &v in gs.values() {
        if v.is_finite() {
            sq += (v - mean) * (v - mean);
        }
    }
    let var = sq / n as f64;
    let std = if var == 0.0 { 1.0 } else { var.sqrt() };
    let stats = NormStats { mean, std };
    Ok((stats.apply(gs), stats))
}
