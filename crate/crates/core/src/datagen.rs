//! Synthetic gridded climate with controllable seasonality, spatial
//! correlation, and AR(1) persistence — enough structure to exercise
//! every forecaster at desk scale without real data.
//!
//! All randomness comes from [`crate::rng::StreamRng`] substreams
//! (temperature noise on stream 1, precipitation noise on stream 2),
//! drawn cell by cell in time-major row-major order, so a seed fixes the
//! output bit for bit.

use crate::grid::GridSeries;
use crate::indices::{pdsi_grid, IndexError, DEFAULT_AWC_MM};
use crate::rng::StreamRng;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("bad synthetic config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Synthetic field configuration. Temperatures are
/// `base + amplitude * sin(2 pi month / 12) + anomaly`; precipitation is
/// the same with the seasonal phase flipped, clipped at zero. Anomalies
/// follow `a_t = phi * a_{t-1} + smooth(noise_t)` with a renormalized box
/// kernel of radius `correlation_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub months: usize,
    pub seed: u64,
    pub temp_base_c: f64,
    pub temp_amplitude_c: f64,
    pub precip_base_mm: f64,
    pub precip_amplitude_mm: f64,
    pub correlation_radius: usize,
    pub ar_coefficient: f64,
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            height: 9,
            width: 16,
            months: 240,
            seed: 0,
            temp_base_c: 11.0,
            temp_amplitude_c: 12.0,
            precip_base_mm: 70.0,
            precip_amplitude_mm: 25.0,
            correlation_radius: 2,
            ar_coefficient: 0.8,
            noise_std: 1.0,
        }
    }
}

/// Start date stamped on every synthetic series.
pub const SYNTH_START: (i32, u32) = (2000, 1);

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.height == 0 || self.width == 0 {
            return Err(DatagenError::BadConfig("empty grid".into()));
        }
        if self.months < 24 {
            return Err(DatagenError::BadConfig(format!(
                "need at least 24 months, got {}",
                self.months
            )));
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return Err(DatagenError::BadConfig(format!(
                "AR coefficient {} outside [0, 1)",
                self.ar_coefficient
            )));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(DatagenError::BadConfig(format!(
                "bad noise std {}",
                self.noise_std
            )));
        }
        for (name, v) in [
            ("temp_base_c", self.temp_base_c),
            ("temp_amplitude_c", self.temp_amplitude_c),
            ("precip_base_mm", self.precip_base_mm),
            ("precip_amplitude_mm", self.precip_amplitude_mm),
        ] {
            if !v.is_finite() {
                return Err(DatagenError::BadConfig(format!("non-finite {name}")));
            }
        }
        Ok(())
    }
}

/// Box smoothing with the kernel renormalized where it overhangs the edge.
fn box_smooth(field: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    if radius == 0 {
        return field.to_vec();
    }
    let r = radius as isize;
    let mut out = vec![0.0; h * w];
    for row in 0..h as isize {
        for col in 0..w as isize {
            let mut sum = 0.0;
            let mut count = 0usize;
            for dr in -r..=r {
                for dc in -r..=r {
                    let (nr, nc) = (row + dr, col + dc);
                    if nr >= 0 && nr < h as isize && nc >= 0 && nc < w as isize {
                        sum += field[(nr * w as isize + nc) as usize];
                        count += 1;
                    }
                }
            }
            out[(row * w as isize + col) as usize] = sum / count as f64;
        }
    }
    out
}

/// One spatially smoothed AR(1) anomaly field, `months * h * w` values.
fn anomaly_field(cfg: &SynthConfig, mut rng: StreamRng) -> Vec<f64> {
    let (h, w) = (cfg.height, cfg.width);
    let mut out = Vec::with_capacity(cfg.months * h * w);
    let mut state = vec![0.0; h * w];
    for t in 0..cfg.months {
        let noise: Vec<f64> = (0..h * w).map(|_| rng.normal() * cfg.noise_std).collect();
        let smoothed = box_smooth(&noise, h, w, cfg.correlation_radius);
        for (s, n) in state.iter_mut().zip(&smoothed) {
            *s = if t == 0 {
                *n
            } else {
                cfg.ar_coefficient * *s + *n
            };
        }
        out.extend_from_slice(&state);
    }
    out
}

/// Deterministic synthetic climate: `(precipitation, temperature)` grids.
pub fn synth_climate(cfg: &SynthConfig) -> Result<(GridSeries, GridSeries), DatagenError> {
    cfg.validate()?;
    let root = StreamRng::new(cfg.seed);
    let temp_anomalies = anomaly_field(cfg, root.stream(1));
    let precip_anomalies = anomaly_field(cfg, root.stream(2));

    let (h, w) = (cfg.height, cfg.width);
    let mut temps = Vec::with_capacity(cfg.months * h * w);
    let mut precip = Vec::with_capacity(cfg.months * h * w);
    for t in 0..cfg.months {
        let month = (t + SYNTH_START.1 as usize - 1) % 12;
        let season = (2.0 * PI * month as f64 / 12.0).sin();
        let temp_season = cfg.temp_base_c + cfg.temp_amplitude_c * season;
        // Wet season opposite the warm season.
        let precip_season = cfg.precip_base_mm - cfg.precip_amplitude_mm * season;
        for cell in 0..h * w {
            let idx = t * h * w + cell;
            temps.push(temp_season + temp_anomalies[idx]);
            precip.push((precip_season + precip_anomalies[idx]).max(0.0));
        }
    }
    let temps =
        GridSeries::from_values(temps, cfg.months, h, w, SYNTH_START.0, SYNTH_START.1)
            .expect("synthetic temperatures are finite");
    let precip =
        GridSeries::from_values(precip, cfg.months, h, w, SYNTH_START.0, SYNTH_START.1)
            .expect("synthetic precipitation is finite");
    Ok((precip, temps))
}

/// Latitude assigned to every synthetic grid row.
pub const SYNTH_LATITUDE: f64 = 45.0;

/// Synthetic drought-index field: climate from [`synth_climate`] pushed
/// through the per-cell Palmer computation at the default soil capacity.
pub fn synth_pdsi_field(cfg: &SynthConfig) -> Result<GridSeries, DatagenError> {
    let (precip, temps) = synth_climate(cfg)?;
    let lat = vec![SYNTH_LATITUDE; cfg.height];
    let awc = vec![DEFAULT_AWC_MM; cfg.height * cfg.width];
    Ok(pdsi_grid(&precip, &temps, &lat, &awc)?)
}
