//! GSV1, the plain-text gridded-series interchange format, and the
//! single-column CSV used for scalar (daily) series.
//!
//! GSV1 layout:
//!
//! ```text
//! GSV1 <T> <H> <W> <start_year> <start_month>
//! <W comma-separated decimals>   // row 0 of month 0
//! ...                            // T blocks of H lines, LF endings
//! ```
//!
//! Missing cells hold the literal `nan` at every month. Values are
//! rendered with 17 significant digits so a save/load round trip is
//! bit-exact.

use super::{GridError, GridSeries};
use crate::numfmt::{fmt_f64, parse_f64};
use std::fs;
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> GridError {
    GridError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_grid_series(path: &Path) -> Result<GridSeries, GridError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_gsv1(&text)
}

pub(crate) fn parse_gsv1(text: &str) -> Result<GridSeries, GridError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| GridError::MalformedHeader("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "GSV1" {
        return Err(GridError::MalformedHeader(format!(
            "expected `GSV1 <T> <H> <W> <start_year> <start_month>`, got `{header}`"
        )));
    }
    let t: usize = fields[1]
        .parse()
        .map_err(|_| GridError::MalformedHeader(format!("bad T `{}`", fields[1])))?;
    let h: usize = fields[2]
        .parse()
        .map_err(|_| GridError::MalformedHeader(format!("bad H `{}`", fields[2])))?;
    let w: usize = fields[3]
        .parse()
        .map_err(|_| GridError::MalformedHeader(format!("bad W `{}`", fields[3])))?;
    let start_year: i32 = fields[4]
        .parse()
        .map_err(|_| GridError::MalformedHeader(format!("bad start year `{}`", fields[4])))?;
    let start_month: u32 = fields[5]
        .parse()
        .map_err(|_| GridError::MalformedHeader(format!("bad start month `{}`", fields[5])))?;

    let mut values = Vec::with_capacity(t.saturating_mul(h).saturating_mul(w));
    let mut line_no = 1usize;
    for _ in 0..t.saturating_mul(h) {
        line_no += 1;
        let line = lines.next().ok_or_else(|| GridError::BadBody {
            line: line_no,
            what: "unexpected end of file".into(),
        })?;
        let mut n_fields = 0usize;
        for token in line.split(',') {
            let token = token.trim();
            n_fields += 1;
            let v = parse_f64(token).ok_or_else(|| GridError::BadBody {
                line: line_no,
                what: format!("bad value `{token}`"),
            })?;
            values.push(v);
        }
        if n_fields != w {
            return Err(GridError::BadBody {
                line: line_no,
                what: format!("expected {w} values, got {n_fields}"),
            });
        }
    }
    if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
        return Err(GridError::BadBody {
            line: line_no + 1,
            what: format!("trailing content `{extra}`"),
        });
    }
    GridSeries::from_values(values, t, h, w, start_year, start_month)
}

pub fn save_grid_series(gs: &GridSeries, path: &Path) -> Result<(), GridError> {
    fs::write(path, render_gsv1(gs)).map_err(|e| io_err(path, e))
}

pub(crate) fn render_gsv1(gs: &GridSeries) -> String {
    let (h, w) = (gs.height(), gs.width());
    let mut out = String::new();
    let (year, month) = gs.start();
    out.push_str(&format!("GSV1 {} {} {} {} {}\n", gs.len_t(), h, w, year, month));
    for t in 0..gs.len_t() {
        let frame = gs.frame_values(t);
        for row in 0..h {
            for col in 0..w {
                if col > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_f64(frame[row * w + col]));
            }
            out.push('\n');
        }
    }
    out
}

/// Loads a scalar series: one value per line under a `value` header.
pub fn load_value_csv(path: &Path) -> Result<Vec<f64>, GridError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("value") => {}
        other => {
            return Err(GridError::MalformedHeader(format!(
                "expected `value` header, got `{}`",
                other.unwrap_or("")
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let v = parse_f64(token).ok_or_else(|| GridError::BadBody {
            line: i + 2,
            what: format!("bad value `{token}`"),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Writes a scalar series as single-column CSV with a `value` header.
pub fn save_value_csv(values: &[f64], path: &Path) -> Result<(), GridError> {
    let mut out = String::from("value\n");
    for &v in values {
        out.push_str(&fmt_f64(v));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}
