//! Gradient-boosted regression trees, from scratch: least-squares trees
//! fit to residuals under a shrinkage factor, with pointwise and
//! 3x3-neighborhood featureizations of grid cells.

mod boost;
mod features;
mod io;
mod tree;

pub use boost::{fit_gbt, predict_gbt, train_grid_gbt, GbtModel, GridGbt, TreeParams};
pub use features::{
    build_features_pointwise, build_features_spatial, feature_row, FeatureMatrix,
    NEIGHBOR_DIRECTIONS,
};
pub use io::{load_grid_gbt, save_grid_gbt};
pub use tree::{fit_tree, RegressionTree, TreeNode};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { got: usize, need: usize },
    #[error("series too short: T={t} < lags+horizon={need}")]
    InsufficientLength { t: usize, need: usize },
    #[error("cell ({row}, {col}) is masked invalid")]
    MaskedCell { row: usize, col: usize },
    #[error("model expects {expected} features, got {got}")]
    FeatureCountMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
