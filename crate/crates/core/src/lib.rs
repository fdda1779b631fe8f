//! Drought-index computation and spatio-temporal forecasting on gridded
//! monthly climate data.
//!
//! The crate is organized around a small set of subsystems:
//!
//! - [`grid`] — the gridded time-series data model (`GridSeries`), its
//!   plain-text GSV1 interchange format, chronological splitting,
//!   normalization, and supervised-window construction.
//! - [`indices`] — drought indices: Selyaninov's hydrothermal coefficient
//!   from daily data and the Palmer drought severity index from a monthly
//!   soil water balance.
//! - [`nn`] — the dense-array neural kernel: 2D convolution, a ConvLSTM
//!   cell, exact reverse-mode gradients, Adam, and a finite-difference
//!   gradient checker.
//! - [`gbt`] — gradient-boosted regression trees with pointwise and
//!   3x3-neighborhood featureization.
//! - [`model`] — the forecasting strategies (`convlstm`, `gbt`,
//!   `gbt-spatial`, `persistence`) behind a common [`model::ForecastModel`]
//!   trait, registered by name in a [`model::ModelRegistry`] and selected
//!   at runtime.
//! - [`eval`] — per-cell and aggregate R2 scoring, horizon sweeps, and
//!   report artifacts (CSV/PGM).
//! - [`datagen`] — seeded synthetic climate and drought-index fields with
//!   controllable seasonality, spatial correlation, and AR(1) persistence.

pub mod datagen;
pub mod eval;
pub mod gbt;
pub mod grid;
pub mod indices;
pub mod model;
pub mod nn;
pub mod numfmt;
pub mod reference;
pub mod rng;
