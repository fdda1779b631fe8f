//! Forecast verification: R2 per cell and in aggregate, horizon sweeps,
//! and the report artifacts (CSV, PGM, summary).

mod report;

pub use report::{parse_map_csv, write_report};

use crate::grid::{Frame, GridSeries};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("zero variance in the reference series")]
    ZeroVariance,
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("horizon {k} failed: {message}")]
    SweepFailed { k: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Coefficient of determination `1 - SS_res / SS_tot`. Exactly 1 for a
/// perfect prediction, 0 for the mean predictor, unbounded below.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(EvalError::TooShort(y_true.len()));
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&y, &p) in y_true.iter().zip(y_pred) {
        ss_res += (y - p) * (y - p);
        ss_tot += (y - mean) * (y - mean);
    }
    if ss_tot == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Per-cell R2 of a stack of predicted frames against the matching
/// months of `truth`, starting at month `offset`. Masked and
/// zero-variance cells come back `nan`.
pub fn r2_map(truth: &GridSeries, offset: usize, preds: &[Frame]) -> Result<Frame, EvalError> {
    if preds.len() < 2 {
        return Err(EvalError::TooShort(preds.len()));
    }
    if offset + preds.len() > truth.len_t() {
        return Err(EvalError::Misaligned(format!(
            "{} predictions from month {offset} overrun T={}",
            preds.len(),
            truth.len_t()
        )));
    }
    let (h, w) = (truth.height(), truth.width());
    for (i, p) in preds.iter().enumerate() {
        if p.height() != h || p.width() != w {
            return Err(EvalError::Misaligned(format!(
                "prediction {i} is {}x{}, grid is {h}x{w}",
                p.height(),
                p.width()
            )));
        }
    }
    let mut map = Frame::filled(h, w, f64::NAN);
    for row in 0..h {
        for col in 0..w {
            if !truth.is_valid(row, col) {
                continue;
            }
            let y: Vec<f64> = (0..preds.len())
                .map(|i| truth.get(offset + i, row, col))
                .collect();
            let p: Vec<f64> = preds.iter().map(|f| f.get(row, col)).collect();
            match r2(&y, &p) {
                Ok(v) => map.set(row, col, v),
                Err(EvalError::ZeroVariance) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(map)
}

/// Aggregates of a skill map over its valid (non-`nan`) cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n_valid: usize,
}

pub fn map_stats(map: &Frame) -> Option<MapStats> {
    let valid: Vec<f64> = map.values().iter().copied().filter(|v| v.is_finite()).collect();
    if valid.is_empty() {
        return None;
    }
    let n = valid.len() as f64;
    let mean = valid.iter().sum::<f64>() / n;
    let var = valid.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(MapStats {
        mean,
        std: var.sqrt(),
        min: valid.iter().copied().fold(f64::INFINITY, f64::min),
        max: valid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n_valid: valid.len(),
    })
}

/// Skill report: the spatial R2 map, its aggregates, the horizon curve,
/// and free-form metadata for the summary artifact.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub r2_map: Frame,
    pub stats: MapStats,
    pub horizon_curve: Vec<(usize, f64)>,
    pub metadata: Vec<(String, String)>,
}

impl EvalReport {
    pub fn new(
        r2_map: Frame,
        horizon_curve: Vec<(usize, f64)>,
        metadata: Vec<(String, String)>,
    ) -> Result<Self, EvalError> {
        let stats = map_stats(&r2_map)
            .ok_or_else(|| EvalError::Misaligned("skill map has no valid cells".into()))?;
        for pair in horizon_curve.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(EvalError::Misaligned(format!(
                    "horizon curve keys not increasing: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(EvalReport {
            r2_map,
            stats,
            horizon_curve,
            metadata,
        })
    }
}

/// Runs `evaluate_at(k)` for each horizon (train a fresh model, score the
/// test split) and collects the `(k, mean R2)` curve in order. A failing
/// horizon aborts the sweep naming its `k`.
pub fn horizon_sweep<E: std::fmt::Display>(
    horizons: &[usize],
    mut evaluate_at: impl FnMut(usize) -> Result<f64, E>,
) -> Result<Vec<(usize, f64)>, EvalError> {
    let mut curve = Vec::with_capacity(horizons.len());
    for &k in horizons {
        let score = evaluate_at(k).map_err(|e| EvalError::SweepFailed {
            k,
            message: e.to_string(),
        })?;
        curve.push((k, score));
    }
    Ok(curve)
}
