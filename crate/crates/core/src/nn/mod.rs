//! Minimal dense-array neural kernel: 2D convolution, a ConvLSTM cell,
//! exact reverse-mode gradients for both, Adam, a finite-difference
//! gradient checker, and the DCNN1 checkpoint format.
//!
//! Everything is 64-bit and single-threaded (the gradient checker alone
//! fans out across parameters), so identical seeds and inputs produce
//! bit-identical parameter trajectories.

mod adam;
mod checkpoint;
mod conv;
mod convlstm;
mod gradcheck;

pub use adam::{optimizer_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, ParamBlock};
pub use conv::{conv2d_backward, conv2d_forward, conv2d_forward_into, Conv2dLayer};
pub use convlstm::{
    convlstm_backward, convlstm_step, convlstm_step_first, convlstm_step_infer,
    convlstm_step_into, ConvLstmCell, InferBuffers, StepCache,
};
pub use gradcheck::gradient_check;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient; step aborted")]
    NonFiniteGradient,
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A `C x H x W` stack of 2D feature planes over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        FeatureMap {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), c * h * w, "feature map data length");
        FeatureMap { c, h, w, data }
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The `H x W` plane of channel `c`.
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }

    pub(crate) fn same_shape_dims(&self, c: usize, h: usize, w: usize) -> bool {
        self.c == c && self.h == h && self.w == w
    }

    pub(crate) fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Channel-wise concatenation `[self; other]`.
    pub fn concat_channels(&self, other: &FeatureMap) -> FeatureMap {
        assert_eq!((self.h, self.w), (other.h, other.w), "spatial dims");
        let mut data = Vec::with_capacity((self.c + other.c) * self.h * self.w);
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        FeatureMap {
            c: self.c + other.c,
            h: self.h,
            w: self.w,
            data,
        }
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.c == other.c && self.h == other.h && self.w == other.w
    }
}
