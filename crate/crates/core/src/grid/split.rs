//! Chronological train/validation/test splitting. No shuffling: splits
//! are contiguous in time and ordered train < val < test.

use super::{GridError, GridSeries};

/// Split fractions; boundaries resolve to `floor(frac * T)` cumulative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self, GridError> {
        for (name, f) in [
            ("train", train_frac),
            ("val", val_frac),
            ("test", test_frac),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(GridError::BadSplitSpec(format!(
                    "{name} fraction {f} outside (0, 1)"
                )));
            }
        }
        let sum = train_frac + val_frac + test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GridError::BadSplitSpec(format!(
                "fractions sum to {sum}, expected 1"
            )));
        }
        Ok(SplitSpec {
            train_frac,
            val_frac,
            test_frac,
        })
    }

    /// Month counts `(n_train, n_val, n_test)` for a series of length `t`.
    pub fn boundaries(&self, t: usize) -> (usize, usize, usize) {
        let b1 = (self.train_frac * t as f64).floor() as usize;
        let b2 = ((self.train_frac + self.val_frac) * t as f64).floor() as usize;
        (b1, b2 - b1, t - b2)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.7,
            val_frac: 0.1,
            test_frac: 0.2,
        }
    }
}

/// Cuts a series into three contiguous, disjoint, chronologically ordered
/// segments covering it exactly.
pub fn temporal_split(
    gs: &GridSeries,
    spec: &SplitSpec,
) -> Result<(GridSeries, GridSeries, GridSeries), GridError> {
    let (n_train, n_val, n_test) = spec.boundaries(gs.len_t());
    for (name, n) in [("train", n_train), ("val", n_val), ("test", n_test)] {
        if n == 0 {
            return Err(GridError::EmptySegment(name));
        }
    }
    let take = |from: usize, len: usize| -> GridSeries {
        let per = gs.height() * gs.width();
        let values = gs.values()[from * per..(from + len) * per].to_vec();
        let (year, month) = gs.date_at(from);
        GridSeries::from_values(values, len, gs.height(), gs.width(), year, month)
            .expect("segment of a valid series is valid")
    };
    Ok((
        take(0, n_train),
        take(n_train, n_val),
        take(n_train + n_val, n_test),
    ))
}
