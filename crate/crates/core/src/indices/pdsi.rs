//! Palmer drought severity index from a monthly two-layer soil water
//! balance.
//!
//! The pipeline per cell:
//!
//! 1. Thornthwaite PET from temperature and latitude.
//! 2. Two-layer bucket water balance (surface layer 25.4 mm, underlying
//!    layer `awc - 25.4`; a single layer when `awc <= 25.4`), tracking
//!    actual and potential recharge, runoff, and loss. Storage starts at
//!    field capacity.
//! 3. Calibration of the CAFEC coefficients (alpha, beta, gamma, delta)
//!    and the climatic weight `K` per calendar month over the complete
//!    12-month cycles of the record.
//! 4. Moisture departure `d = P - CAFEC precipitation`, moisture anomaly
//!    `Z = K d`, and the severity recursion
//!    `X_i = 0.897 X_{i-1} + Z_i / 3` with `X_0 = Z_0 / 3`.

use super::pet::pet_thornthwaite;
use super::IndexError;
use crate::grid::GridSeries;

/// Decay factor of the severity recursion.
pub const SEVERITY_DECAY: f64 = 0.897;
/// Scale applied to the moisture anomaly in the recursion.
pub const Z_SCALE: f64 = 1.0 / 3.0;
/// Surface-layer capacity of the two-layer bucket (one inch).
const SURFACE_CAPACITY_MM: f64 = 25.4;
/// Palmer's annual weighting constant for the climatic characteristic.
const K_ANNUAL: f64 = 17.67;
/// The climatic-characteristic constants (2.8, 17.67) are calibrated for
/// departures in inches, so the weighting step converts.
const MM_PER_INCH: f64 = 25.4;
/// Mean absolute departures below this count as zero climate signal, so
/// the weighting cannot blow up on (near-)constant climates.
const DEPARTURE_FLOOR: f64 = 1e-9;
/// Soil water capacity assumed when no field value is available.
pub const DEFAULT_AWC_MM: f64 = 152.4;

/// Monthly climate of one location.
#[derive(Debug, Clone)]
pub struct MonthlyClimate {
    pub precip: Vec<f64>,
    pub temps: Vec<f64>,
    pub latitude: f64,
    pub awc: f64,
    pub start_month: u32,
}

impl MonthlyClimate {
    pub fn new(
        precip: Vec<f64>,
        temps: Vec<f64>,
        latitude: f64,
        awc: f64,
        start_month: u32,
    ) -> Result<Self, IndexError> {
        if precip.len() != temps.len() {
            return Err(IndexError::LengthMismatch(precip.len(), temps.len()));
        }
        if precip.len() < 12 {
            return Err(IndexError::TooShort {
                got: precip.len(),
                need: 12,
            });
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(IndexError::LatitudeOutOfRange(latitude));
        }
        if !(awc.is_finite() && awc > 0.0) {
            return Err(IndexError::NonPositiveAwc(awc));
        }
        if !(1..=12).contains(&start_month) {
            return Err(IndexError::BadStartMonth(start_month));
        }
        if temps.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite("temperature"));
        }
        for (i, &p) in precip.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(IndexError::NegativePrecip(i));
            }
        }
        Ok(MonthlyClimate {
            precip,
            temps,
            latitude,
            awc,
            start_month,
        })
    }
}

/// Every intermediate of the Palmer computation, one entry per month
/// unless noted. Coefficient arrays are indexed by calendar month
/// (0 = January).
#[derive(Debug, Clone)]
pub struct PdsiState {
    pub pet: Vec<f64>,
    pub et: Vec<f64>,
    pub recharge: Vec<f64>,
    pub runoff: Vec<f64>,
    pub loss: Vec<f64>,
    pub pot_recharge: Vec<f64>,
    pub pot_runoff: Vec<f64>,
    pub pot_loss: Vec<f64>,
    pub cafec_precip: Vec<f64>,
    pub departure: Vec<f64>,
    pub z_index: Vec<f64>,
    pub pdsi: Vec<f64>,
    pub alpha: [f64; 12],
    pub beta: [f64; 12],
    pub gamma: [f64; 12],
    pub delta: [f64; 12],
    pub k_weight: [f64; 12],
}

/// The severity recursion on its own: `X_0 = Z_0 / 3`,
/// `X_i = 0.897 X_{i-1} + Z_i / 3`.
pub fn severity_recursion(z: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(z.len());
    let mut prev = 0.0;
    for &zi in z {
        let xi = SEVERITY_DECAY * prev + zi * Z_SCALE;
        x.push(xi);
        prev = xi;
    }
    x
}

struct WaterBalance {
    et: Vec<f64>,
    recharge: Vec<f64>,
    runoff: Vec<f64>,
    loss: Vec<f64>,
    pot_recharge: Vec<f64>,
    pot_runoff: Vec<f64>,
    pot_loss: Vec<f64>,
}

fn water_balance(precip: &[f64], pet: &[f64], awc: f64) -> WaterBalance {
    let surface_cap = awc.min(SURFACE_CAPACITY_MM);
    let under_cap = (awc - SURFACE_CAPACITY_MM).max(0.0);
    let mut surface = surface_cap;
    let mut under = under_cap;

    let n = precip.len();
    let mut wb = WaterBalance {
        et: Vec::with_capacity(n),
        recharge: Vec::with_capacity(n),
        runoff: Vec::with_capacity(n),
        loss: Vec::with_capacity(n),
        pot_recharge: Vec::with_capacity(n),
        pot_runoff: Vec::with_capacity(n),
        pot_loss: Vec::with_capacity(n),
    };

    for i in 0..n {
        let p = precip[i];
        let pe = pet[i];

        wb.pot_recharge.push((surface_cap - surface) + (under_cap - under));
        wb.pot_runoff.push(surface + under);
        let pot_loss_surface = pe.min(surface);
        let pot_loss_under = (((pe - pot_loss_surface) * under) / awc).min(under);
        wb.pot_loss.push(pot_loss_surface + pot_loss_under);

        if p >= pe {
            let mut excess = p - pe;
            let fill_surface = excess.min(surface_cap - surface);
            surface += fill_surface;
            excess -= fill_surface;
            let fill_under = excess.min(under_cap - under);
            under += fill_under;
            excess -= fill_under;
            wb.et.push(pe);
            wb.recharge.push(fill_surface + fill_under);
            wb.runoff.push(excess);
            wb.loss.push(0.0);
        } else {
            let deficit = pe - p;
            let loss_surface = deficit.min(surface);
            let loss_under = (((deficit - loss_surface) * under) / awc).min(under);
            surface -= loss_surface;
            under -= loss_under;
            wb.et.push(p + loss_surface + loss_under);
            wb.recharge.push(0.0);
            wb.runoff.push(0.0);
            wb.loss.push(loss_surface + loss_under);
        }
    }
    wb
}

/// Ratio with the convention `0 / 0 = 1` used by the CAFEC coefficients
/// (a term that never had potential also never happened).
fn cafec_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// Full Palmer computation for one location.
pub fn pdsi(mc: &MonthlyClimate) -> Result<PdsiState, IndexError> {
    let n = mc.precip.len();
    let pet = pet_thornthwaite(&mc.temps, mc.latitude, mc.start_month)?;
    let wb = water_balance(&mc.precip, &pet, mc.awc);

    // Calibration over complete 12-month cycles from the record start;
    // each cycle covers every calendar month exactly once.
    let n_cal = (n / 12) * 12;
    let month_of = |i: usize| (mc.start_month as usize - 1 + i) % 12;

    let mean = |series: &[f64]| -> [f64; 12] {
        let mut sums = [0.0f64; 12];
        for i in 0..n_cal {
            sums[month_of(i)] += series[i];
        }
        let years = (n_cal / 12) as f64;
        sums.map(|s| s / years)
    };
    let p_bar = mean(&mc.precip);
    let pet_bar = mean(&pet);
    let et_bar = mean(&wb.et);
    let r_bar = mean(&wb.recharge);
    let ro_bar = mean(&wb.runoff);
    let l_bar = mean(&wb.loss);
    let pr_bar = mean(&wb.pot_recharge);
    let pro_bar = mean(&wb.pot_runoff);
    let pl_bar = mean(&wb.pot_loss);

    let mut alpha = [0.0f64; 12];
    let mut beta = [0.0f64; 12];
    let mut gamma = [0.0f64; 12];
    let mut delta = [0.0f64; 12];
    for m in 0..12 {
        alpha[m] = cafec_ratio(et_bar[m], pet_bar[m]);
        beta[m] = cafec_ratio(r_bar[m], pr_bar[m]);
        gamma[m] = cafec_ratio(ro_bar[m], pro_bar[m]);
        delta[m] = cafec_ratio(l_bar[m], pl_bar[m]);
    }

    let mut cafec_precip = Vec::with_capacity(n);
    let mut departure = Vec::with_capacity(n);
    for (i, &pet_i) in pet.iter().enumerate() {
        let m = month_of(i);
        let expected = alpha[m] * pet_i + beta[m] * wb.pot_recharge[i]
            + gamma[m] * wb.pot_runoff[i]
            - delta[m] * wb.pot_loss[i];
        cafec_precip.push(expected);
        departure.push(mc.precip[i] - expected);
    }

    // Climatic characteristic K: Palmer's two-step weighting on the mean
    // absolute departure of each calendar month, in inches.
    let mut d_bar = [0.0f64; 12];
    for i in 0..n_cal {
        d_bar[month_of(i)] += departure[i].abs() / MM_PER_INCH;
    }
    let years = (n_cal / 12) as f64;
    for d in d_bar.iter_mut() {
        *d /= years;
    }

    let mut k_first = [0.0f64; 12];
    for m in 0..12 {
        if d_bar[m] <= DEPARTURE_FLOOR {
            k_first[m] = 0.0;
            continue;
        }
        let supply = pet_bar[m] + r_bar[m] + ro_bar[m];
        let demand = p_bar[m] + l_bar[m];
        let ratio = if demand > 0.0 { supply / demand } else { 0.0 };
        k_first[m] = 1.5 * ((ratio + 2.8) / d_bar[m]).log10() + 0.5;
    }
    let annual: f64 = (0..12).map(|m| d_bar[m] * k_first[m]).sum();
    let mut k_weight = [0.0f64; 12];
    for m in 0..12 {
        k_weight[m] = if annual > DEPARTURE_FLOOR {
            K_ANNUAL * k_first[m] / annual
        } else {
            0.0
        };
    }

    let z_index: Vec<f64> = (0..n)
        .map(|i| k_weight[month_of(i)] * departure[i] / MM_PER_INCH)
        .collect();
    let x = severity_recursion(&z_index);

    Ok(PdsiState {
        pet,
        et: wb.et,
        recharge: wb.recharge,
        runoff: wb.runoff,
        loss: wb.loss,
        pot_recharge: wb.pot_recharge,
        pot_runoff: wb.pot_runoff,
        pot_loss: wb.pot_loss,
        cafec_precip,
        departure,
        z_index,
        pdsi: x,
        alpha,
        beta,
        gamma,
        delta,
        k_weight,
    })
}

/// Per-cell Palmer index over a grid. `lat_per_row` holds one latitude
/// per grid row; `awc_per_cell` one capacity per cell (row-major). The
/// output is masked invalid exactly where either input is.
pub fn pdsi_grid(
    precip: &GridSeries,
    temps: &GridSeries,
    lat_per_row: &[f64],
    awc_per_cell: &[f64],
) -> Result<GridSeries, IndexError> {
    if !precip.same_layout(temps) {
        return Err(IndexError::GridMismatch(format!(
            "precip is {}x{}x{} from {:?}, temps is {}x{}x{} from {:?}",
            precip.len_t(),
            precip.height(),
            precip.width(),
            precip.start(),
            temps.len_t(),
            temps.height(),
            temps.width(),
            temps.start()
        )));
    }
    let (t, h, w) = (precip.len_t(), precip.height(), precip.width());
    if lat_per_row.len() != h {
        return Err(IndexError::GridMismatch(format!(
            "expected {h} row latitudes, got {}",
            lat_per_row.len()
        )));
    }
    if awc_per_cell.len() != h * w {
        return Err(IndexError::GridMismatch(format!(
            "expected {} cell capacities, got {}",
            h * w,
            awc_per_cell.len()
        )));
    }

    let mut values = vec![f64::NAN; t * h * w];
    for row in 0..h {
        for col in 0..w {
            if !(precip.is_valid(row, col) && temps.is_valid(row, col)) {
                continue;
            }
            let mc = MonthlyClimate::new(
                precip.cell_series(row, col),
                temps.cell_series(row, col),
                lat_per_row[row],
                awc_per_cell[row * w + col],
                precip.start().1,
            )?;
            let state = pdsi(&mc)?;
            for (ti, &x) in state.pdsi.iter().enumerate() {
                values[(ti * h + row) * w + col] = x;
            }
        }
    }
    let (year, month) = precip.start();
    GridSeries::from_values(values, t, h, w, year, month)
        .map_err(|e| IndexError::GridMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_climate(months: usize) -> MonthlyClimate {
        MonthlyClimate::new(
            vec![80.0; months],
            vec![15.0; months],
            45.0,
            DEFAULT_AWC_MM,
            1,
        )
        .unwrap()
    }

    #[test]
    fn zero_departure_keeps_severity_at_zero() {
        // A constant climate repeats itself every year, so every month
        // equals its calibration expectation and the departures vanish.
        let state = pdsi(&constant_climate(120)).unwrap();
        for (i, &x) in state.pdsi.iter().enumerate() {
            assert!(x.abs() <= 1e-9, "month {i}: X = {x}");
        }
    }

    #[test]
    fn impulse_decays_at_the_fixed_rate() {
        let mut z = vec![0.0; 40];
        z[0] = 3.0;
        let x = severity_recursion(&z);
        assert_eq!(x[0], 1.0);
        let mut expected = 1.0;
        for &xi in &x[1..] {
            expected *= SEVERITY_DECAY;
            assert_eq!(xi, expected);
        }
        // Stated as a product: each month is exactly 0.897 times the last.
        for i in 1..x.len() {
            assert_eq!(x[i], SEVERITY_DECAY * x[i - 1]);
        }
    }

    #[test]
    fn wet_spell_raises_dry_spell_lowers() {
        let mut precip = vec![60.0; 240];
        let temps: Vec<f64> = (0..240)
            .map(|i| 12.0 + 10.0 * (2.0 * std::f64::consts::PI * (i % 12) as f64 / 12.0).sin())
            .collect();
        // Three very wet summers and three dry ones.
        for year in 0..3 {
            precip[year * 12 + 6] = 220.0;
        }
        for year in 10..13 {
            precip[year * 12 + 6] = 0.0;
        }
        let mc = MonthlyClimate::new(precip, temps, 42.0, DEFAULT_AWC_MM, 1).unwrap();
        let state = pdsi(&mc).unwrap();
        assert!(state.pdsi[6] > 0.5, "wet July should push X up");
        assert!(state.pdsi[126] < -0.5, "dry July should push X down");
    }

    #[test]
    fn water_balance_conserves_mass() {
        let precip: Vec<f64> = (0..48).map(|i| 40.0 + 30.0 * ((i * 7) % 13) as f64).collect();
        let temps: Vec<f64> = (0..48)
            .map(|i| 10.0 + 12.0 * (2.0 * std::f64::consts::PI * (i % 12) as f64 / 12.0).sin())
            .collect();
        let pet = pet_thornthwaite(&temps, 40.0, 1).unwrap();
        let wb = water_balance(&precip, &pet, 100.0);
        // P = ET + R + RO - L month by month.
        for i in 0..precip.len() {
            let lhs = precip[i];
            let rhs = wb.et[i] + wb.recharge[i] + wb.runoff[i] - wb.loss[i];
            assert!((lhs - rhs).abs() < 1e-9, "month {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn single_layer_when_awc_small() {
        let precip = vec![0.0; 24];
        let temps = vec![20.0; 24];
        let pet = pet_thornthwaite(&temps, 0.0, 1).unwrap();
        let wb = water_balance(&precip, &pet, 10.0);
        // Total loss can never exceed the single 10 mm layer.
        let total: f64 = wb.loss.iter().sum();
        assert!(total <= 10.0 + 1e-12, "lost {total}");
    }

    #[test]
    fn grid_matches_scalar_per_cell() {
        let (t, h, w) = (24usize, 3usize, 3usize);
        let mut precip = Vec::with_capacity(t * h * w);
        let mut temps = Vec::with_capacity(t * h * w);
        for ti in 0..t {
            for cell in 0..h * w {
                precip.push(50.0 + 10.0 * ((ti * 3 + cell * 7) % 11) as f64);
                temps.push(8.0 + 14.0
                    * (2.0 * std::f64::consts::PI * (ti % 12) as f64 / 12.0).sin()
                    + cell as f64 * 0.25);
            }
        }
        let pg = GridSeries::from_values(precip, t, h, w, 1995, 1).unwrap();
        let tg = GridSeries::from_values(temps, t, h, w, 1995, 1).unwrap();
        let lat = [44.0, 45.0, 46.0];
        let awc = vec![DEFAULT_AWC_MM; 9];
        let out = pdsi_grid(&pg, &tg, &lat, &awc).unwrap();
        for row in 0..h {
            for col in 0..w {
                let mc = MonthlyClimate::new(
                    pg.cell_series(row, col),
                    tg.cell_series(row, col),
                    lat[row],
                    DEFAULT_AWC_MM,
                    1,
                )
                .unwrap();
                let scalar = pdsi(&mc).unwrap();
                for ti in 0..t {
                    assert_eq!(out.get(ti, row, col), scalar.pdsi[ti]);
                }
            }
        }
    }

    #[test]
    fn grid_mask_propagates() {
        let nan = f64::NAN;
        let mut precip = vec![60.0; 24 * 2];
        let mut temps = vec![15.0; 24 * 2];
        for ti in 0..24 {
            precip[ti * 2 + 1] = nan;
            temps[ti * 2 + 1] = nan;
        }
        let pg = GridSeries::from_values(precip, 24, 1, 2, 2000, 1).unwrap();
        let tg = GridSeries::from_values(temps, 24, 1, 2, 2000, 1).unwrap();
        let out = pdsi_grid(&pg, &tg, &[45.0], &[100.0, 100.0]).unwrap();
        assert!(out.is_valid(0, 0));
        assert!(!out.is_valid(0, 1));
    }

    #[test]
    fn grid_dimension_mismatch() {
        let pg = GridSeries::from_values(vec![1.0; 24], 24, 1, 1, 2000, 1).unwrap();
        let tg = GridSeries::from_values(vec![1.0; 48], 24, 1, 2, 2000, 1).unwrap();
        assert!(pdsi_grid(&pg, &tg, &[45.0], &[100.0]).is_err());
    }

    #[test]
    fn identical_cells_produce_identical_series() {
        let t = 36;
        let one: Vec<f64> = (0..t).map(|i| 55.0 + (i % 12) as f64 * 4.0).collect();
        let temps_one: Vec<f64> = (0..t).map(|i| 10.0 + (i % 12) as f64).collect();
        let mut precip = Vec::new();
        let mut temps = Vec::new();
        for i in 0..t {
            precip.extend([one[i], one[i]]);
            temps.extend([temps_one[i], temps_one[i]]);
        }
        let pg = GridSeries::from_values(precip, t, 1, 2, 2000, 1).unwrap();
        let tg = GridSeries::from_values(temps, t, 1, 2, 2000, 1).unwrap();
        let out = pdsi_grid(&pg, &tg, &[45.0], &[120.0, 120.0]).unwrap();
        for ti in 0..t {
            assert_eq!(out.get(ti, 0, 0), out.get(ti, 0, 1));
        }
    }

    #[test]
    fn validation_errors() {
        assert!(MonthlyClimate::new(vec![1.0; 12], vec![1.0; 12], 45.0, 0.0, 1).is_err());
        assert!(MonthlyClimate::new(vec![1.0; 12], vec![1.0; 12], 45.0, -5.0, 1).is_err());
        assert!(MonthlyClimate::new(vec![-1.0; 12], vec![1.0; 12], 45.0, 100.0, 1).is_err());
        assert!(MonthlyClimate::new(vec![1.0; 6], vec![1.0; 6], 45.0, 100.0, 1).is_err());
        assert!(
            MonthlyClimate::new(vec![1.0; 12], vec![f64::NAN; 12], 45.0, 100.0, 1).is_err()
        );
    }
}
