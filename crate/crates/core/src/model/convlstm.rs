//! The convolutional-recurrent forecaster: a 3x3 embedding convolution
//! into 16 channels, one ConvLSTM cell with 32-channel hidden and cell
//! states, and a 1x1 head collapsing the final hidden state to the
//! predicted grid.
//!
//! Training minimizes mean squared error over valid cells of normalized
//! windows, restores the parameters with the best validation loss, and is
//! bit-reproducible under a fixed seed. One model is trained per
//! forecast horizon (direct forecasting, no iterated rollout).
//!
//! The grid pipeline feeds a single input channel by default (the
//! drought index itself). With `seasonal_inputs` two exogenous channels
//! carrying the cos/sin encoding of each frame's calendar month are
//! appended, which lets the network modulate its anomaly extrapolation
//! by season. The network layer itself accepts any channel count.

use super::{
    save_sidecar, sidecar_parse, ForecastModel, ForecastStrategy, ModelError, ModelParams,
};
use crate::grid::{make_windows, normalize, Frame, GridSeries, NormStats, WindowSample};
use crate::nn::{
    conv2d_backward, conv2d_forward, conv2d_forward_into, convlstm_backward, convlstm_step,
    convlstm_step_first, convlstm_step_into, optimizer_step, read_checkpoint, write_checkpoint,
    AdamState, Conv2dLayer, ConvLstmCell, FeatureMap, InferBuffers, NnError, ParamBlock,
    StepCache,
};
use crate::numfmt::fmt_f64;
use crate::rng::StreamRng;
use rayon::prelude::*;
use std::path::Path;

pub const EMBED_CHANNELS: usize = 16;
pub const HIDDEN_CHANNELS: usize = 32;

/// Training-loop knobs (a view on [`ModelParams`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seq_len: usize,
    pub horizon: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub patience: usize,
}

impl From<&ModelParams> for TrainConfig {
    fn from(p: &ModelParams) -> Self {
        TrainConfig {
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            seq_len: p.seq_len,
            horizon: p.horizon,
            batch_size: p.batch_size,
            seed: p.seed,
            patience: p.patience,
        }
    }
}

/// The network itself: embedding conv, recurrent cell, 1x1 head.
#[derive(Debug, Clone)]
pub struct ConvLstmForecaster {
    pub embed: Conv2dLayer,
    pub cell: ConvLstmCell,
    pub head: Conv2dLayer,
    c_input: usize,
}

struct ForwardCache {
    steps: Vec<StepCache>,
    h_last: FeatureMap,
}

impl ConvLstmForecaster {
    /// Seeded initialization; draws embedding, gate, then head parameters
    /// from substreams 1..=3 of the seed.
    pub fn new(c_input: usize, seed: u64) -> Self {
        let root = StreamRng::new(seed);
        let mut embed = Conv2dLayer::new(EMBED_CHANNELS, c_input, 3);
        embed.init_uniform(&mut root.stream(1));
        let cell = ConvLstmCell::new(EMBED_CHANNELS, HIDDEN_CHANNELS, 3, &mut root.stream(2));
        let mut head = Conv2dLayer::new(1, HIDDEN_CHANNELS, 1);
        head.init_uniform(&mut root.stream(3));
        ConvLstmForecaster {
            embed,
            cell,
            head,
            c_input,
        }
    }

    pub fn c_input(&self) -> usize {
        self.c_input
    }

    /// Embeds each frame, steps the cell across the sequence, and maps
    /// the final hidden state to a single-channel grid.
    pub fn forward(&self, frames: &[FeatureMap]) -> Result<FeatureMap, NnError> {
        if frames.is_empty() {
            return Err(NnError::ShapeMismatch("empty input sequence".into()));
        }
        let (h_dim, w_dim) = (frames[0].height(), frames[0].width());
        let mut h = FeatureMap::zeros(HIDDEN_CHANNELS, h_dim, w_dim);
        let mut c = FeatureMap::zeros(HIDDEN_CHANNELS, h_dim, w_dim);
        let mut h_next = FeatureMap::zeros(HIDDEN_CHANNELS, h_dim, w_dim);
        let mut c_next = FeatureMap::zeros(HIDDEN_CHANNELS, h_dim, w_dim);
        let mut embedded = FeatureMap::zeros(EMBED_CHANNELS, h_dim, w_dim);
        let mut embed_cols = Vec::new();
        let mut buffers = InferBuffers::default();
        for (step, frame) in frames.iter().enumerate() {
            conv2d_forward_into(frame, &self.embed, &mut embedded, &mut embed_cols)?;
            if step == 0 {
                convlstm_step_first(&self.cell, &embedded, &mut h_next, &mut c_next, &mut buffers)?;
            } else {
                convlstm_step_into(
                    &self.cell,
                    &embedded,
                    &h,
                    &c,
                    &mut h_next,
                    &mut c_next,
                    &mut buffers,
                )?;
            }
            std::mem::swap(&mut h, &mut h_next);
            std::mem::swap(&mut c, &mut c_next);
        }
        conv2d_forward(&h, &self.head)
    }

    /// Hidden-state channel count after one step (architecture probe).
    pub fn state_channels(&self) -> usize {
        self.cell.c_hidden()
    }

    /// Embedding channel count (architecture probe).
    pub fn embed_channels(&self) -> usize {
        self.embed.c_out()
    }

    fn forward_cached(&self, frames: &[FeatureMap]) -> Result<(FeatureMap, ForwardCache), NnError> {
        let (h_dim, w_dim) = (frames[0].height(), frames[0].width());
        let mut h = FeatureMap::zeros(HIDDEN_CHANNELS, h_dim, w_dim);
        let mut c = FeatureMap::zeros(HIDDEN_CHANNELS, h_dim, w_dim);
        let mut steps = Vec::with_capacity(frames.len());
        for frame in frames {
            let e = conv2d_forward(frame, &self.embed)?;
            let (h_new, c_new, cache) = convlstm_step(&self.cell, &e, &h, &c)?;
            steps.push(cache);
            h = h_new;
            c = c_new;
        }
        let pred = conv2d_forward(&h, &self.head)?;
        Ok((pred, ForwardCache { steps, h_last: h }))
    }

    /// Masked mean squared error and its gradient with respect to the
    /// prediction. Non-finite targets are the masked cells.
    fn masked_mse(pred: &FeatureMap, target: &[f64]) -> (f64, FeatureMap, usize) {
        let mut grad = FeatureMap::zeros(1, pred.height(), pred.width());
        let n_valid = target.iter().filter(|v| v.is_finite()).count();
        if n_valid == 0 {
            return (0.0, grad, 0);
        }
        let mut loss = 0.0;
        for (i, &t) in target.iter().enumerate() {
            if t.is_finite() {
                let diff = pred.data()[i] - t;
                loss += diff * diff;
                grad.data_mut()[i] = 2.0 * diff / n_valid as f64;
            }
        }
        (loss / n_valid as f64, grad, n_valid)
    }

    /// Backpropagation through time; parameter gradients accumulate into
    /// the layers. `frames` must be the sequence the cache was built on.
    fn backward(
        &mut self,
        frames: &[FeatureMap],
        cache: &ForwardCache,
        grad_pred: &FeatureMap,
    ) -> Result<(), NnError> {
        let mut grad_h = conv2d_backward(&cache.h_last, &mut self.head, grad_pred)?;
        let (h_dim, w_dim) = (grad_h.height(), grad_h.width());
        let mut grad_c = FeatureMap::zeros(HIDDEN_CHANNELS, h_dim, w_dim);
        for t in (0..cache.steps.len()).rev() {
            let (grad_embedded, grad_h_prev, grad_c_prev) =
                convlstm_backward(&mut self.cell, &cache.steps[t], &grad_h, &grad_c)?;
            conv2d_backward(&frames[t], &mut self.embed, &grad_embedded)?;
            grad_h = grad_h_prev;
            grad_c = grad_c_prev;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.embed.zero_grad();
        self.cell.gates.zero_grad();
        self.head.zero_grad();
    }

    pub fn n_params(&self) -> usize {
        self.embed.n_params() + self.cell.gates.n_params() + self.head.n_params()
    }

    /// Flattened parameters, in checkpoint block order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.embed.weights);
        out.extend_from_slice(&self.embed.bias);
        out.extend_from_slice(&self.cell.gates.weights);
        out.extend_from_slice(&self.cell.gates.bias);
        out.extend_from_slice(&self.head.weights);
        out.extend_from_slice(&self.head.bias);
        out
    }

    pub fn grads_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.embed.grad_weights);
        out.extend_from_slice(&self.embed.grad_bias);
        out.extend_from_slice(&self.cell.gates.grad_weights);
        out.extend_from_slice(&self.cell.gates.grad_bias);
        out.extend_from_slice(&self.head.grad_weights);
        out.extend_from_slice(&self.head.grad_bias);
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter vector length");
        let mut offset = 0;
        for slot in [
            &mut self.embed.weights,
            &mut self.embed.bias,
            &mut self.cell.gates.weights,
            &mut self.cell.gates.bias,
            &mut self.head.weights,
            &mut self.head.bias,
        ] {
            let len = slot.len();
            slot.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
    }

    /// Loss of one window (forward only).
    pub fn window_loss(&self, frames: &[FeatureMap], target: &[f64]) -> Result<f64, NnError> {
        let pred = self.forward(frames)?;
        Ok(Self::masked_mse(&pred, target).0)
    }

    /// One gradient accumulation over a window; returns the loss.
    pub fn window_backward(
        &mut self,
        frames: &[FeatureMap],
        target: &[f64],
    ) -> Result<f64, NnError> {
        let (pred, cache) = self.forward_cached(frames)?;
        let (loss, grad_pred, _) = Self::masked_mse(&pred, target);
        self.backward(frames, &cache, &grad_pred)?;
        Ok(loss)
    }
}

/// Fitted state: the network plus the normalization and window geometry
/// it was trained with.
pub struct ConvLstmModel {
    pub net: ConvLstmForecaster,
    pub params: ModelParams,
    pub stats: Option<NormStats>,
    fitted: bool,
}

impl ConvLstmModel {
    pub fn new(params: &ModelParams) -> Result<Self, ModelError> {
        params.validate()?;
        let c_input = if params.seasonal_inputs { 3 } else { 1 };
        Ok(ConvLstmModel {
            net: ConvLstmForecaster::new(c_input, params.seed),
            params: params.clone(),
            stats: None,
            fitted: false,
        })
    }

    /// Assembles a fitted model from an externally trained network and
    /// the normalization it was trained under (staged training loops).
    pub fn from_parts(
        net: ConvLstmForecaster,
        params: ModelParams,
        stats: NormStats,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        Ok(ConvLstmModel {
            net,
            params,
            stats: Some(stats),
            fitted: true,
        })
    }
}

/// Builds one model-input frame: channel 0 holds the (normalized) index
/// values with masked cells zero-filled; with seasonal inputs, channels
/// 1 and 2 hold the cos/sin encoding of the frame's calendar month.
pub fn input_frame(
    values: &[f64],
    h: usize,
    w: usize,
    month0: usize,
    seasonal: bool,
) -> FeatureMap {
    let per = h * w;
    let channels = if seasonal { 3 } else { 1 };
    let mut data = Vec::with_capacity(channels * per);
    data.extend(values.iter().map(|&v| if v.is_finite() { v } else { 0.0 }));
    if seasonal {
        let phase = 2.0 * std::f64::consts::PI * month0 as f64 / 12.0;
        data.extend(std::iter::repeat_n(phase.cos(), per));
        data.extend(std::iter::repeat_n(phase.sin(), per));
    }
    FeatureMap::from_vec(channels, h, w, data)
}

/// Expands supervised windows into model-input datasets. `start_month0`
/// is the 0-based calendar month of the series' first frame, so window
/// frame `i` of the sample starting at `t0` falls on calendar month
/// `(start_month0 + t0 + i) % 12`.
pub fn windows_to_dataset(
    windows: &[WindowSample],
    h: usize,
    w: usize,
    start_month0: usize,
    seasonal: bool,
) -> Vec<(Vec<FeatureMap>, Vec<f64>)> {
    let per = h * w;
    windows
        .iter()
        .map(|sample| {
            let months = sample.input.len() / per;
            let frames = (0..months)
                .map(|i| {
                    input_frame(
                        &sample.input[i * per..(i + 1) * per],
                        h,
                        w,
                        (start_month0 + sample.t0 + i) % 12,
                        seasonal,
                    )
                })
                .collect();
            (frames, sample.target.clone())
        })
        .collect()
}

impl ForecastModel for ConvLstmModel {
    fn kind(&self) -> &'static str {
        "convlstm"
    }

    fn context_len(&self) -> usize {
        self.params.seq_len
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn fit(&mut self, train: &GridSeries, val: &GridSeries) -> Result<FitLog, ModelError> {
        let cfg = TrainConfig::from(&self.params);
        let seasonal = self.params.seasonal_inputs;
        let (h, w) = (train.height(), train.width());
        let (train_normed, stats) = normalize(train)?;
        let val_normed = stats.apply(val);
        let train_windows = make_windows(&train_normed, cfg.seq_len, cfg.horizon)?;
        let val_windows = make_windows(&val_normed, cfg.seq_len, cfg.horizon)?;
        let train_set =
            windows_to_dataset(&train_windows, h, w, train.start().1 as usize - 1, seasonal);
        let val_set = windows_to_dataset(&val_windows, h, w, val.start().1 as usize - 1, seasonal);
        let log = train_network(&mut self.net, &train_set, &val_set, &cfg)?;
        self.stats = Some(stats);
        self.fitted = true;
        Ok(log)
    }

    fn predict_at(&self, series: &GridSeries, origin: usize) -> Result<Frame, ModelError> {
        if !self.fitted {
            return Err(ModelError::NotFitted);
        }
        let seq_len = self.params.seq_len;
        if origin + 1 < seq_len || origin >= series.len_t() {
            return Err(ModelError::Grid(crate::grid::GridError::TooShort {
                t: origin + 1,
                need: seq_len,
            }));
        }
        let stats = self.stats.as_ref().ok_or(ModelError::NotFitted)?;
        let (h, w) = (series.height(), series.width());
        let start_month0 = series.start().1 as usize - 1;
        let frames: Vec<FeatureMap> = (origin + 1 - seq_len..=origin)
            .map(|t| {
                let normed: Vec<f64> = series
                    .frame_values(t)
                    .iter()
                    .map(|&v| (v - stats.mean) / stats.std)
                    .collect();
                input_frame(
                    &normed,
                    h,
                    w,
                    (start_month0 + t) % 12,
                    self.params.seasonal_inputs,
                )
            })
            .collect();
        let pred = self.net.forward(&frames)?;
        let mut frame = Frame::filled(h, w, f64::NAN);
        for row in 0..h {
            for col in 0..w {
                if series.is_valid(row, col) {
                    frame.set(row, col, stats.denorm_value(pred.get(0, row, col)));
                }
            }
        }
        Ok(frame)
    }

    fn save(&self, path: &Path, extra_meta: &[(String, String)]) -> Result<(), ModelError> {
        if !self.fitted {
            return Err(ModelError::NotFitted);
        }
        let net = &self.net;
        write_checkpoint(
            path,
            net.c_input(),
            HIDDEN_CHANNELS,
            &[
                ParamBlock { name: "embed.weight", data: &net.embed.weights },
                ParamBlock { name: "embed.bias", data: &net.embed.bias },
                ParamBlock { name: "gates.weight", data: &net.cell.gates.weights },
                ParamBlock { name: "gates.bias", data: &net.cell.gates.bias },
                ParamBlock { name: "head.weight", data: &net.head.weights },
                ParamBlock { name: "head.bias", data: &net.head.bias },
            ],
        )?;
        let stats = self.stats.as_ref().ok_or(ModelError::NotFitted)?;
        let mut meta = vec![
            ("model".to_string(), "convlstm".to_string()),
            ("l".to_string(), self.params.seq_len.to_string()),
            ("k".to_string(), self.params.horizon.to_string()),
            ("c_x".to_string(), net.c_input().to_string()),
            (
                "seasonal".to_string(),
                if self.params.seasonal_inputs { "1" } else { "0" }.to_string(),
            ),
            ("norm_mean".to_string(), fmt_f64(stats.mean)),
            ("norm_std".to_string(), fmt_f64(stats.std)),
            ("seed".to_string(), self.params.seed.to_string()),
        ];
        meta.extend_from_slice(extra_meta);
        save_sidecar(path, &meta)
    }
}

/// The training loop shared by `fit` and the overfit harness: mini-batch
/// Adam with per-epoch seeded shuffling, early stopping on validation
/// loss, and best-validation parameter restoration.
pub fn train_network(
    net: &mut ConvLstmForecaster,
    train_frames: &[(Vec<FeatureMap>, Vec<f64>)],
    val_frames: &[(Vec<FeatureMap>, Vec<f64>)],
    cfg: &TrainConfig,
) -> Result<FitLog, ModelError> {
    if train_frames.is_empty() || val_frames.is_empty() {
        return Err(ModelError::BadParams("empty window dataset".into()));
    }

    let mut adam = AdamState::new(net.n_params(), cfg.learning_rate);
    let shuffle_root = StreamRng::new(cfg.seed).stream(100);
    let mut best_val = f64::INFINITY;
    let mut best_params = net.params_flat();
    let mut epochs_since_best = 0usize;
    let mut log = FitLogBuilder::new();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_frames.len()).collect();
        shuffle_root.stream(epoch as u64).shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            // Window gradients are independent, so they are computed in
            // parallel and summed in window order; the result does not
            // depend on the thread count.
            let per_window: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&wi| {
                    let (frames, target) = &train_frames[wi];
                    let mut worker = net.clone();
                    worker.zero_grad();
                    let loss = worker.window_backward(frames, target)?;
                    Ok((loss, worker.grads_flat()))
                })
                .collect::<Result<_, NnError>>()?;
            let mut grads = vec![0.0; net.n_params()];
            for (loss, window_grads) in &per_window {
                epoch_loss += loss;
                for (g, w) in grads.iter_mut().zip(window_grads) {
                    *g += w;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            let mut params = net.params_flat();
            optimizer_step(&mut params, &grads, &mut adam)?;
            net.set_params_flat(&params);
        }
        let train_loss = epoch_loss / train_frames.len() as f64;
        let val_losses: Vec<f64> = val_frames
            .par_iter()
            .map(|(frames, target)| net.window_loss(frames, target))
            .collect::<Result<_, NnError>>()?;
        let val_loss = val_losses.iter().sum::<f64>() / val_frames.len() as f64;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(ModelError::Nn(NnError::NonFiniteLoss));
        }
        log.push(epoch, train_loss, val_loss);

        if val_loss < best_val {
            best_val = val_loss;
            best_params = net.params_flat();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }
    }
    net.set_params_flat(&best_params);
    Ok(log.finish())
}

struct FitLogBuilder {
    rows: Vec<Vec<f64>>,
}

impl FitLogBuilder {
    fn new() -> Self {
        FitLogBuilder { rows: Vec::new() }
    }

    fn push(&mut self, epoch: usize, train: f64, val: f64) {
        self.rows.push(vec![epoch as f64, train, val]);
    }

    fn finish(self) -> super::FitLog {
        super::FitLog {
            columns: vec!["epoch", "train_loss", "val_loss"],
            rows: self.rows,
        }
    }
}

use super::FitLog;

/// Strategy factory for the registry.
pub struct ConvLstmStrategy;

impl ForecastStrategy for ConvLstmStrategy {
    fn name(&self) -> &'static str {
        "convlstm"
    }

    fn build(&self, params: &ModelParams) -> Result<Box<dyn ForecastModel>, ModelError> {
        Ok(Box::new(ConvLstmModel::new(params)?))
    }

    fn load(&self, checkpoint: &Path) -> Result<Box<dyn ForecastModel>, ModelError> {
        let meta = super::load_sidecar(checkpoint)?;
        let mut ck = read_checkpoint(checkpoint)?;
        let params = ModelParams {
            seq_len: sidecar_parse(&meta, "l", checkpoint)?,
            horizon: sidecar_parse(&meta, "k", checkpoint)?,
            seed: sidecar_parse(&meta, "seed", checkpoint)?,
            seasonal_inputs: ck.c_input == 3,
            ..ModelParams::default()
        };
        let mean: f64 = sidecar_parse(&meta, "norm_mean", checkpoint)?;
        let std: f64 = sidecar_parse(&meta, "norm_std", checkpoint)?;

        let mut net = ConvLstmForecaster::new(ck.c_input, params.seed);
        net.embed.weights = ck.take("embed.weight")?;
        net.embed.bias = ck.take("embed.bias")?;
        net.cell.gates.weights = ck.take("gates.weight")?;
        net.cell.gates.bias = ck.take("gates.bias")?;
        net.head.weights = ck.take("head.weight")?;
        net.head.bias = ck.take("head.bias")?;

        Ok(Box::new(ConvLstmModel {
            net,
            params,
            stats: Some(NormStats { mean, std }),
            fitted: true,
        }))
    }
}
