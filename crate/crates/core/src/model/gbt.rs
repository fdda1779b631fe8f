//! Gradient-boosting strategies: one ensemble per grid cell, fit on the
//! cell's own lags (`gbt`) or on the lags of its full 3x3 neighborhood
//! (`gbt-spatial`). Trees work on raw index values, so no normalization
//! is involved; the validation split is unused.

use super::{
    save_sidecar, sidecar_parse, FitLog, ForecastModel, ForecastStrategy, ModelError, ModelParams,
};
use crate::gbt::{load_grid_gbt, save_grid_gbt, train_grid_gbt, GridGbt, TreeParams};
use crate::grid::{Frame, GridSeries};
use std::path::Path;

pub struct GbtModelAdapter {
    params: ModelParams,
    spatial: bool,
    inner: Option<GridGbt>,
}

impl GbtModelAdapter {
    fn kind_name(spatial: bool) -> &'static str {
        if spatial {
            "gbt-spatial"
        } else {
            "gbt"
        }
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            n_trees: self.params.n_trees,
            shrinkage: self.params.shrinkage,
            max_depth: self.params.max_depth,
            min_samples_leaf: self.params.min_samples_leaf,
        }
    }
}

impl ForecastModel for GbtModelAdapter {
    fn kind(&self) -> &'static str {
        Self::kind_name(self.spatial)
    }

    fn context_len(&self) -> usize {
        self.params.lags
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn fit(&mut self, train: &GridSeries, _val: &GridSeries) -> Result<FitLog, ModelError> {
        let (model, trace) = train_grid_gbt(
            train,
            self.spatial,
            self.params.lags,
            self.params.horizon,
            &self.tree_params(),
        )?;
        self.inner = Some(model);
        Ok(FitLog {
            columns: vec!["tree_index", "train_mse"],
            rows: trace
                .into_iter()
                .enumerate()
                .map(|(i, mse)| vec![i as f64, mse])
                .collect(),
        })
    }

    fn predict_at(&self, series: &GridSeries, origin: usize) -> Result<Frame, ModelError> {
        let inner = self.inner.as_ref().ok_or(ModelError::NotFitted)?;
        Ok(inner.predict_at(series, origin)?)
    }

    fn save(&self, path: &Path, extra_meta: &[(String, String)]) -> Result<(), ModelError> {
        let inner = self.inner.as_ref().ok_or(ModelError::NotFitted)?;
        save_grid_gbt(inner, path)?;
        let mut meta = vec![
            ("model".to_string(), self.kind().to_string()),
            ("lags".to_string(), self.params.lags.to_string()),
            ("k".to_string(), self.params.horizon.to_string()),
            ("seed".to_string(), self.params.seed.to_string()),
        ];
        meta.extend_from_slice(extra_meta);
        save_sidecar(path, &meta)
    }
}

/// Factory for both boosting variants.
pub struct GbtGridStrategy {
    spatial: bool,
}

impl GbtGridStrategy {
    pub fn pointwise() -> Self {
        GbtGridStrategy { spatial: false }
    }

    pub fn spatial() -> Self {
        GbtGridStrategy { spatial: true }
    }
}

impl ForecastStrategy for GbtGridStrategy {
    fn name(&self) -> &'static str {
        GbtModelAdapter::kind_name(self.spatial)
    }

    fn build(&self, params: &ModelParams) -> Result<Box<dyn ForecastModel>, ModelError> {
        params.validate()?;
        Ok(Box::new(GbtModelAdapter {
            params: params.clone(),
            spatial: self.spatial,
            inner: None,
        }))
    }

    fn load(&self, checkpoint: &Path) -> Result<Box<dyn ForecastModel>, ModelError> {
        let meta = super::load_sidecar(checkpoint)?;
        let inner = load_grid_gbt(checkpoint)?;
        if inner.spatial != self.spatial {
            return Err(ModelError::BadSidecar {
                path: checkpoint.display().to_string(),
                what: format!(
                    "checkpoint is {}, strategy is {}",
                    GbtModelAdapter::kind_name(inner.spatial),
                    self.name()
                ),
            });
        }
        let params = ModelParams {
            lags: inner.lags,
            horizon: sidecar_parse(&meta, "k", checkpoint)?,
            seed: sidecar_parse(&meta, "seed", checkpoint)?,
            ..ModelParams::default()
        };
        Ok(Box::new(GbtModelAdapter {
            params,
            spatial: self.spatial,
            inner: Some(inner),
        }))
    }
}
