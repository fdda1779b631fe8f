//! Forecasting strategies behind one trait.
//!
//! Every model family — the ConvLSTM network, pointwise and spatial
//! gradient boosting, and the persistence floor — implements
//! [`ForecastModel`] and registers a [`ForecastStrategy`] factory in the
//! [`ModelRegistry`] under its runtime name (`convlstm`, `gbt`,
//! `gbt-spatial`, `persistence`). Callers select a strategy by name from
//! config, fit it on chronological splits, and get back grids.
//!
//! A saved model is a checkpoint file (DCNN1, GBT1, or the one-line
//! persistence stamp) plus a `<path>.meta` sidecar of `key=value` lines;
//! the sidecar's `model` key tells [`ModelRegistry::load_checkpoint`]
//! which strategy owns the file.

mod convlstm;
mod gbt;
mod persistence;

pub use convlstm::{
    input_frame, train_network, windows_to_dataset, ConvLstmForecaster, ConvLstmModel,
    ConvLstmStrategy, TrainConfig, EMBED_CHANNELS, HIDDEN_CHANNELS,
};
pub use gbt::{GbtGridStrategy, GbtModelAdapter};
pub use persistence::{PersistenceModel, PersistenceStrategy};

use crate::eval::{map_stats, r2_map, EvalError, MapStats};
use crate::gbt::GbtError;
use crate::grid::{Frame, GridError, GridSeries, SplitSpec};
use crate::nn::NnError;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("unknown model `{name}`; known: {known}")]
    UnknownModel { name: String, known: String },
    #[error("model has not been fitted")]
    NotFitted,
    #[error("bad model parameters: {0}")]
    BadParams(String),
    #[error("bad sidecar {path}: {what}")]
    BadSidecar { path: String, what: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ModelError {
    /// True for numerical/training failures (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ModelError::Nn(NnError::NonFiniteLoss) | ModelError::Nn(NnError::NonFiniteGradient)
        )
    }
}

/// Tunables shared by every strategy; each reads the fields it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Input months per window (ConvLSTM).
    pub seq_len: usize,
    /// Forecast horizon in months.
    pub horizon: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping early.
    pub patience: usize,
    pub seed: u64,
    /// Append cos/sin calendar-month channels to the network input.
    pub seasonal_inputs: bool,
    /// Lagged months per cell (boosting).
    pub lags: usize,
    pub n_trees: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            seq_len: 12,
            horizon: 1,
            epochs: 30,
            learning_rate: 1e-3,
            batch_size: 8,
            patience: 10,
            seed: 0,
            seasonal_inputs: false,
            lags: 12,
            n_trees: 200,
            shrinkage: 0.1,
            max_depth: 3,
            min_samples_leaf: 5,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: String| Err(ModelError::BadParams(what));
        if self.seq_len == 0 || self.horizon == 0 || self.lags == 0 {
            return bad("seq_len, horizon, and lags must be at least 1".into());
        }
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return bad("epochs, patience, and batch_size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return bad(format!("shrinkage {} outside (0, 1]", self.shrinkage));
        }
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return bad("max_depth and min_samples_leaf must be at least 1".into());
        }
        Ok(())
    }

    /// Derives the parameter set for horizon `k` with a fresh seed, so a
    /// sweep trains an independent model per horizon.
    pub fn for_horizon(&self, k: usize) -> ModelParams {
        ModelParams {
            horizon: k,
            seed: crate::rng::mix(self.seed ^ crate::rng::mix(k as u64)),
            ..self.clone()
        }
    }
}

/// Per-iteration training history, CSV-shaped.
#[derive(Debug, Clone, PartialEq)]
pub struct FitLog {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl FitLog {
    pub fn empty() -> Self {
        FitLog {
            columns: vec![],
            rows: vec![],
        }
    }
}

/// A forecasting model: fit on chronological splits, then asked for the
/// grid `horizon` months past a forecast origin.
pub trait ForecastModel {
    /// Registry name of the strategy that built this model.
    fn kind(&self) -> &'static str;
    /// Months of history a prediction needs (window length or lag count).
    fn context_len(&self) -> usize;
    /// Forecast horizon `k` this model was configured for.
    fn horizon(&self) -> usize;
    /// Trains on `train`, tracking `val` where the family supports it.
    fn fit(&mut self, train: &GridSeries, val: &GridSeries) -> Result<FitLog, ModelError>;
    /// Predicts the grid for month `origin + horizon` from the history
    /// ending at `origin`. Masked cells come back `nan`.
    fn predict_at(&self, series: &GridSeries, origin: usize) -> Result<Frame, ModelError>;
    /// Writes the checkpoint and its `.meta` sidecar; `extra_meta` lands
    /// in the sidecar after the model's own keys.
    fn save(&self, path: &Path, extra_meta: &[(String, String)]) -> Result<(), ModelError>;
}

/// Builds and reloads one model family.
pub trait ForecastStrategy: Sync {
    fn name(&self) -> &'static str;
    fn build(&self, params: &ModelParams) -> Result<Box<dyn ForecastModel>, ModelError>;
    fn load(&self, checkpoint: &Path) -> Result<Box<dyn ForecastModel>, ModelError>;
}

/// Name-keyed strategy registry. [`ModelRegistry::with_builtins`] holds
/// the four built-in families; further strategies can be registered at
/// runtime.
pub struct ModelRegistry {
    strategies: BTreeMap<&'static str, Box<dyn ForecastStrategy>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        ModelRegistry {
            strategies: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut registry = ModelRegistry::new();
        registry.register(Box::new(ConvLstmStrategy));
        registry.register(Box::new(GbtGridStrategy::pointwise()));
        registry.register(Box::new(GbtGridStrategy::spatial()));
        registry.register(Box::new(PersistenceStrategy));
        registry
    }

    pub fn register(&mut self, strategy: Box<dyn ForecastStrategy>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn ForecastStrategy, ModelError> {
        self.strategies
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| ModelError::UnknownModel {
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn build(
        &self,
        name: &str,
        params: &ModelParams,
    ) -> Result<Box<dyn ForecastModel>, ModelError> {
        self.get(name)?.build(params)
    }

    /// Reloads a saved model by reading the sidecar's `model` key and
    /// dispatching to that strategy.
    pub fn load_checkpoint(&self, path: &Path) -> Result<Box<dyn ForecastModel>, ModelError> {
        let meta = load_sidecar(path)?;
        let kind = sidecar_get(&meta, "model", path)?;
        self.get(&kind)?.load(path)
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

pub(crate) fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    checkpoint.with_file_name(name)
}

pub(crate) fn save_sidecar(
    checkpoint: &Path,
    entries: &[(String, String)],
) -> Result<(), ModelError> {
    let path = sidecar_path(checkpoint);
    let mut out = String::new();
    for (key, value) in entries {
        out.push_str(&format!("{key}={value}\n"));
    }
    fs::write(&path, out).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub(crate) fn load_sidecar(checkpoint: &Path) -> Result<Vec<(String, String)>, ModelError> {
    let path = sidecar_path(checkpoint);
    let text = fs::read_to_string(&path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ModelError::BadSidecar {
            path: path.display().to_string(),
            what: format!("expected key=value, got `{line}`"),
        })?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

pub(crate) fn sidecar_get(
    entries: &[(String, String)],
    key: &str,
    checkpoint: &Path,
) -> Result<String, ModelError> {
    entries
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| ModelError::BadSidecar {
            path: sidecar_path(checkpoint).display().to_string(),
            what: format!("missing key `{key}`"),
        })
}

pub(crate) fn sidecar_parse<T: std::str::FromStr>(
    entries: &[(String, String)],
    key: &str,
    checkpoint: &Path,
) -> Result<T, ModelError> {
    let raw = sidecar_get(entries, key, checkpoint)?;
    raw.parse().map_err(|_| ModelError::BadSidecar {
        path: sidecar_path(checkpoint).display().to_string(),
        what: format!("bad value `{raw}` for `{key}`"),
    })
}

/// Scores a fitted model over the test segment of `full`: every test
/// month whose forecast origin has enough history gets a prediction, and
/// the per-cell R2 map is computed against the truth.
pub fn evaluate_on_test(
    model: &dyn ForecastModel,
    full: &GridSeries,
    split: &SplitSpec,
) -> Result<(Frame, MapStats), ModelError> {
    let (n_train, n_val, _) = split.boundaries(full.len_t());
    let test_start = n_train + n_val;
    evaluate_months(model, full, test_start, full.len_t())
}

/// Scores a fitted model over an arbitrary month range `[from, to)`.
pub fn evaluate_months(
    model: &dyn ForecastModel,
    full: &GridSeries,
    from: usize,
    to: usize,
) -> Result<(Frame, MapStats), ModelError> {
    let k = model.horizon();
    let min_target = (model.context_len() - 1 + k).max(from);
    if min_target + 2 > to {
        return Err(ModelError::Eval(EvalError::TooShort(
            to.saturating_sub(min_target),
        )));
    }
    let mut preds = Vec::with_capacity(to - min_target);
    for target_month in min_target..to {
        preds.push(model.predict_at(full, target_month - k)?);
    }
    let map = r2_map(full, min_target, &preds)?;
    let stats = map_stats(&map).ok_or(ModelError::Eval(EvalError::ZeroVariance))?;
    Ok((map, stats))
}
