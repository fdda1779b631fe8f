//! Selyaninov's hydrothermal coefficient: `10 * sum(P) / sum(T)` over the
//! days whose mean temperature exceeds 10 degrees C. Values below 1
//! indicate insufficient moisture.

use super::IndexError;

const GROWING_THRESHOLD_C: f64 = 10.0;

/// Daily mean temperature and precipitation over one period.
#[derive(Debug, Clone)]
pub struct DailyClimate {
    temps: Vec<f64>,
    precip: Vec<f64>,
}

impl DailyClimate {
    pub fn new(temps: Vec<f64>, precip: Vec<f64>) -> Result<Self, IndexError> {
        if temps.len() != precip.len() {
            return Err(IndexError::LengthMismatch(temps.len(), precip.len()));
        }
        if temps.is_empty() {
            return Err(IndexError::TooShort { got: 0, need: 1 });
        }
        if temps.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite("temperature"));
        }
        for (i, &p) in precip.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(IndexError::NegativePrecip(i));
            }
        }
        Ok(DailyClimate { temps, precip })
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn precip(&self) -> &[f64] {
        &self.precip
    }
}

/// The hydrothermal coefficient of the supplied day range.
///
/// The threshold is strict: only days with mean temperature above (not at)
/// 10 degrees C contribute to either sum.
pub fn htc(dc: &DailyClimate) -> Result<f64, IndexError> {
    let mut sum_p = 0.0;
    let mut sum_t = 0.0;
    let mut any = false;
    for (&t, &p) in dc.temps.iter().zip(&dc.precip) {
        if t > GROWING_THRESHOLD_C {
            sum_p += p;
            sum_t += t;
            any = true;
        }
    }
    if !any {
        return Err(IndexError::NoGrowingSeason);
    }
    Ok(10.0 * sum_p / sum_t)
}
