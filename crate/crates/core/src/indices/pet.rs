//! Thornthwaite potential evapotranspiration from monthly mean
//! temperature and latitude.
//!
//! The annual heat index is built from the record's per-calendar-month
//! mean temperatures, so the series must cover at least a full year.
//! Monthly values are corrected for day length (FAO declination formula
//! evaluated at mid-month) and month length.

use super::IndexError;
use std::f64::consts::PI;

pub const DAYS_IN_MONTH: [f64; 12] = [
    31.0, 28.0, 31.0, 30.0, 31.0, 30.0, 31.0, 31.0, 30.0, 31.0, 30.0, 31.0,
];

/// Day of year of the 15th of each month.
const MID_MONTH_DOY: [f64; 12] = [
    15.0, 46.0, 74.0, 105.0, 135.0, 166.0, 196.0, 227.0, 258.0, 288.0, 319.0, 349.0,
];

/// Temperature at which the high-temperature polynomial peaks; hotter
/// months are evaluated at the peak so PET stays nondecreasing.
const HOT_CAP_C: f64 = 32.24 / (2.0 * 0.43);

/// Boundary between the heat-index branch and the high-temperature
/// polynomial.
const HOT_BRANCH_C: f64 = 26.5;

/// Mean daylight hours for calendar month `month0` (0 = January) at the
/// given latitude. Polar day/night clamps to 24/0 hours.
pub fn day_length_hours(latitude_deg: f64, month0: usize) -> f64 {
    let j = MID_MONTH_DOY[month0];
    let declination = 0.409 * (2.0 * PI / 365.0 * j - 1.39).sin();
    let phi = latitude_deg.to_radians();
    let x = (-phi.tan() * declination.tan()).clamp(-1.0, 1.0);
    x.acos() * 24.0 / PI
}

/// Annual heat index from per-calendar-month mean temperatures.
pub fn heat_index(monthly_mean_temps: &[f64; 12]) -> f64 {
    monthly_mean_temps
        .iter()
        .map(|&t| (t.max(0.0) / 5.0).powf(1.514))
        .sum()
}

fn heat_exponent(i: f64) -> f64 {
    6.75e-7 * i.powi(3) - 7.71e-5 * i.powi(2) + 1.792e-2 * i + 0.49239
}

/// Unadjusted monthly PET (mm for a standard 30-day, 12-hour month).
///
/// Nondecreasing in `temp_c` for any fixed heat index: the heat-index
/// branch is capped at the polynomial's value at the branch point, and
/// temperatures past the polynomial peak evaluate at the peak.
pub fn pet_month_unadjusted(temp_c: f64, i: f64) -> f64 {
    let hot = |t: f64| -415.85 + 32.24 * t - 0.43 * t * t;
    if temp_c <= 0.0 {
        0.0
    } else if temp_c <= HOT_BRANCH_C {
        if i <= 0.0 {
            0.0
        } else {
            (16.0 * (10.0 * temp_c / i).powf(heat_exponent(i))).min(hot(HOT_BRANCH_C))
        }
    } else {
        hot(temp_c.min(HOT_CAP_C))
    }
}

/// Monthly PET (mm) for a temperature series starting at calendar month
/// `start_month` (1..=12) at the given latitude.
pub fn pet_thornthwaite(
    temps: &[f64],
    latitude_deg: f64,
    start_month: u32,
) -> Result<Vec<f64>, IndexError> {
    if !(-90.0..=90.0).contains(&latitude_deg) {
        return Err(IndexError::LatitudeOutOfRange(latitude_deg));
    }
    if !(1..=12).contains(&start_month) {
        return Err(IndexError::BadStartMonth(start_month));
    }
    if temps.len() < 12 {
        return Err(IndexError::TooShort {
            got: temps.len(),
            need: 12,
        });
    }
    if temps.iter().any(|v| !v.is_finite()) {
        return Err(IndexError::NonFinite("temperature"));
    }

    // Per-calendar-month climatology of the whole record.
    let mut sums = [0.0f64; 12];
    let mut counts = [0usize; 12];
    for (idx, &t) in temps.iter().enumerate() {
        let m = (start_month as usize - 1 + idx) % 12;
        sums[m] += t;
        counts[m] += 1;
    }
    let mut means = [0.0f64; 12];
    for m in 0..12 {
        means[m] = sums[m] / counts[m] as f64;
    }
    let i = heat_index(&means);

    let mut out = Vec::with_capacity(temps.len());
    for (idx, &t) in temps.iter().enumerate() {
        let m = (start_month as usize - 1 + idx) % 12;
        let correction = day_length_hours(latitude_deg, m) / 12.0 * (DAYS_IN_MONTH[m] / 30.0);
        out.push(pet_month_unadjusted(t, i) * correction);
    }
    Ok(out)
}
