//! The persistence baseline: month `t + k` is forecast to equal month
//! `t`. Every learned model has to beat this floor to claim any skill.

use super::{
    save_sidecar, sidecar_parse, FitLog, ForecastModel, ForecastStrategy, ModelError, ModelParams,
};
use crate::grid::{Frame, GridError, GridSeries};
use std::fs;
use std::path::Path;

pub struct PersistenceModel {
    horizon: usize,
}

impl PersistenceModel {
    pub fn new(horizon: usize) -> Self {
        PersistenceModel { horizon }
    }
}

impl ForecastModel for PersistenceModel {
    fn kind(&self) -> &'static str {
        "persistence"
    }

    fn context_len(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn fit(&mut self, _train: &GridSeries, _val: &GridSeries) -> Result<FitLog, ModelError> {
        Ok(FitLog::empty())
    }

    fn predict_at(&self, series: &GridSeries, origin: usize) -> Result<Frame, ModelError> {
        if origin >= series.len_t() {
            return Err(ModelError::Grid(GridError::TooShort {
                t: series.len_t(),
                need: origin + 1,
            }));
        }
        Ok(series.frame(origin))
    }

    fn save(&self, path: &Path, extra_meta: &[(String, String)]) -> Result<(), ModelError> {
        fs::write(path, format!("PERSIST1 {}\n", self.horizon)).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut meta = vec![
            ("model".to_string(), "persistence".to_string()),
            ("k".to_string(), self.horizon.to_string()),
        ];
        meta.extend_from_slice(extra_meta);
        save_sidecar(path, &meta)
    }
}

pub struct PersistenceStrategy;

impl ForecastStrategy for PersistenceStrategy {
    fn name(&self) -> &'static str {
        "persistence"
    }

    fn build(&self, params: &ModelParams) -> Result<Box<dyn ForecastModel>, ModelError> {
        if params.horizon == 0 {
            return Err(ModelError::BadParams("horizon must be at least 1".into()));
        }
        Ok(Box::new(PersistenceModel::new(params.horizon)))
    }

    fn load(&self, checkpoint: &Path) -> Result<Box<dyn ForecastModel>, ModelError> {
        let meta = super::load_sidecar(checkpoint)?;
        let horizon = sidecar_parse(&meta, "k", checkpoint)?;
        Ok(Box::new(PersistenceModel::new(horizon)))
    }
}
