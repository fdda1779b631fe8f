//! Drought indices: Selyaninov's hydrothermal coefficient (HTC) from
//! daily data and the Palmer drought severity index (PDSI) from a monthly
//! soil water balance.

mod htc;
mod pdsi;
mod pet;

pub use htc::{htc, DailyClimate};
pub use pdsi::{
    pdsi, pdsi_grid, severity_recursion, MonthlyClimate, PdsiState, DEFAULT_AWC_MM,
    SEVERITY_DECAY, Z_SCALE,
};
pub use pet::pet_thornthwaite;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("no growing season: no day with mean temperature above 10 degrees C")]
    NoGrowingSeason,
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("available water capacity {0} must be positive")]
    NonPositiveAwc(f64),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series too short: {got} < {need}")]
    TooShort { got: usize, need: usize },
    #[error("negative precipitation at index {0}")]
    NegativePrecip(usize),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("start month {0} outside 1..=12")]
    BadStartMonth(u32),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}
