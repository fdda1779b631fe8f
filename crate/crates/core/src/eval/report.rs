//! Report artifacts:
//!
//! - `r2_map.csv` — H rows of W comma-separated values, `nan` at
//!   non-value cells, 17 significant digits.
//! - `r2_map.pgm` — plain P2 grayscale, R2 clipped to `[0, 1]` and scaled
//!   to 0..=255 (non-values render 0).
//! - `horizon.csv` — `k,mean_r2` header plus one row per horizon.
//! - `summary.txt` — `key=value` aggregates and metadata.

use super::{EvalError, EvalReport};
use crate::grid::Frame;
use crate::numfmt::fmt_f64;
use std::fs;
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn render_map_csv(map: &Frame) -> String {
    let mut out = String::new();
    for row in 0..map.height() {
        for col in 0..map.width() {
            if col > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(map.get(row, col)));
        }
        out.push('\n');
    }
    out
}

pub(crate) fn render_map_pgm(map: &Frame) -> String {
    let mut out = format!("P2\n{} {}\n255\n", map.width(), map.height());
    for row in 0..map.height() {
        let pixels: Vec<String> = (0..map.width())
            .map(|col| {
                let v = map.get(row, col);
                let level = if v.is_finite() {
                    (v.clamp(0.0, 1.0) * 255.0).round() as u32
                } else {
                    0
                };
                level.to_string()
            })
            .collect();
        out.push_str(&pixels.join(" "));
        out.push('\n');
    }
    out
}

/// Writes all four artifacts into `out_dir` (created if needed).
pub fn write_report(report: &EvalReport, out_dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let csv_path = out_dir.join("r2_map.csv");
    fs::write(&csv_path, render_map_csv(&report.r2_map)).map_err(|e| io_err(&csv_path, e))?;

    let pgm_path = out_dir.join("r2_map.pgm");
    fs::write(&pgm_path, render_map_pgm(&report.r2_map)).map_err(|e| io_err(&pgm_path, e))?;

    let horizon_path = out_dir.join("horizon.csv");
    let mut horizon = String::from("k,mean_r2\n");
    for &(k, score) in &report.horizon_curve {
        horizon.push_str(&format!("{k},{}\n", fmt_f64(score)));
    }
    fs::write(&horizon_path, horizon).map_err(|e| io_err(&horizon_path, e))?;

    let summary_path = out_dir.join("summary.txt");
    let mut summary = String::new();
    summary.push_str(&format!("mean_r2={}\n", fmt_f64(report.stats.mean)));
    summary.push_str(&format!("std_r2={}\n", fmt_f64(report.stats.std)));
    summary.push_str(&format!("min_r2={}\n", fmt_f64(report.stats.min)));
    summary.push_str(&format!("max_r2={}\n", fmt_f64(report.stats.max)));
    summary.push_str(&format!("n_valid_cells={}\n", report.stats.n_valid));
    for (key, value) in &report.metadata {
        summary.push_str(&format!("{key}={value}\n"));
    }
    fs::write(&summary_path, summary).map_err(|e| io_err(&summary_path, e))
}

/// Parses `r2_map.csv` back into a frame (the round-trip check).
pub fn parse_map_csv(text: &str) -> Result<Frame, EvalError> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.is_empty() {
        return Err(EvalError::Misaligned("empty map csv".into()));
    }
    let w = rows[0].split(',').count();
    let mut data = Vec::with_capacity(rows.len() * w);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != w {
            return Err(EvalError::Misaligned("ragged map csv".into()));
        }
        for field in fields {
            let v = crate::numfmt::parse_f64(field.trim())
                .ok_or_else(|| EvalError::Misaligned(format!("bad value `{field}`")))?;
            data.push(v);
        }
    }
    Ok(Frame::new(rows.len(), w, data))
}
