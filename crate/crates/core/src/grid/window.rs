//! Supervised-window construction: `L` consecutive input months paired
//! with the target month `k` steps past the input end.

use super::{GridError, GridSeries};

/// One training sample: `input` is `L x H x W`, `target` is the `H x W`
/// frame at month `t0 + L - 1 + k`.
#[derive(Debug, Clone)]
pub struct WindowSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub t0: usize,
}

/// Enumerates every valid window. Returns exactly `T - L - k + 1` samples;
/// sample `i` starts at month `i`.
pub fn make_windows(
    gs: &GridSeries,
    seq_len: usize,
    horizon: usize,
) -> Result<Vec<WindowSample>, GridError> {
    assert!(seq_len >= 1 && horizon >= 1, "L and k must be at least 1");
    let t = gs.len_t();
    let need = seq_len + horizon;
    if t < need {
        return Err(GridError::TooShort { t, need });
    }
    let per = gs.height() * gs.width();
    let n = t - need + 1;
    let mut out = Vec::with_capacity(n);
    for t0 in 0..n {
        let input = gs.values()[t0 * per..(t0 + seq_len) * per].to_vec();
        let target_month = t0 + seq_len - 1 + horizon;
        let target = gs.frame_values(target_month).to_vec();
        out.push(WindowSample { input, target, t0 });
    }
    Ok(out)
}
