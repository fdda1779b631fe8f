//! A ConvLSTM cell: an LSTM whose hidden and cell states are multi-channel
//! 2D feature maps and whose gate transformation is one fused convolution
//! over the concatenated `[input; hidden]` stack.
//!
//! Gate blocks in the fused output are ordered `[input, forget,
//! candidate, output]`, each `c_hidden` channels wide.

use super::conv::{
    conv2d_backward, conv2d_forward, conv2d_forward_into, gemm_acc, im2col_into, Conv2dLayer,
};
use super::{FeatureMap, NnError};
use crate::rng::StreamRng;

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[derive(Debug, Clone)]
pub struct ConvLstmCell {
    /// Fused gate convolution: `(c_input + c_hidden) -> 4 * c_hidden`.
    pub gates: Conv2dLayer,
    c_input: usize,
    c_hidden: usize,
}

/// Everything the backward pass needs about one step.
#[derive(Debug, Clone)]
pub struct StepCache {
    concat: FeatureMap,
    gate_i: FeatureMap,
    gate_f: FeatureMap,
    gate_g: FeatureMap,
    gate_o: FeatureMap,
    c_prev: FeatureMap,
    tanh_c_new: FeatureMap,
}

impl ConvLstmCell {
    /// Seeded initialization: uniform `+-1/sqrt(fan_in)` gate weights,
    /// forget-gate bias +1, every other bias 0.
    pub fn new(c_input: usize, c_hidden: usize, kernel: usize, rng: &mut StreamRng) -> Self {
        let mut gates = Conv2dLayer::new(4 * c_hidden, c_input + c_hidden, kernel);
        gates.init_uniform(rng);
        for b in gates.bias[c_hidden..2 * c_hidden].iter_mut() {
            *b = 1.0;
        }
        ConvLstmCell {
            gates,
            c_input,
            c_hidden,
        }
    }

    pub fn c_input(&self) -> usize {
        self.c_input
    }

    pub fn c_hidden(&self) -> usize {
        self.c_hidden
    }

    fn check_shapes(
        &self,
        x: &FeatureMap,
        h: &FeatureMap,
        c: &FeatureMap,
    ) -> Result<(), NnError> {
        if x.channels() != self.c_input
            || h.channels() != self.c_hidden
            || c.channels() != self.c_hidden
            || h.height() != x.height()
            || h.width() != x.width()
            || !h.same_shape(c)
        {
            return Err(NnError::ShapeMismatch(format!(
                "step got x {}x{}x{}, h {}x{}x{}, c {}x{}x{} for cell ({} -> {})",
                x.channels(),
                x.height(),
                x.width(),
                h.channels(),
                h.height(),
                h.width(),
                c.channels(),
                c.height(),
                c.width(),
                self.c_input,
                self.c_hidden
            )));
        }
        Ok(())
    }
}

/// Reusable working memory for the inference step.
#[derive(Debug, Default)]
pub struct InferBuffers {
    concat: Vec<f64>,
    pre: Option<FeatureMap>,
    cols: Vec<f64>,
}

/// [`convlstm_step`] without the backward bookkeeping, for inference.
pub fn convlstm_step_infer(
    cell: &ConvLstmCell,
    x: &FeatureMap,
    h: &FeatureMap,
    c: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap), NnError> {
    let mut h_new = FeatureMap::zeros(cell.c_hidden, x.height(), x.width());
    let mut c_new = FeatureMap::zeros(cell.c_hidden, x.height(), x.width());
    let mut buffers = InferBuffers::default();
    convlstm_step_into(cell, x, h, c, &mut h_new, &mut c_new, &mut buffers)?;
    Ok((h_new, c_new))
}

/// The first inference step, where both states are zero: the gate
/// convolution reads only the input block of the fused weights, the
/// forget path vanishes, and no concatenation is needed.
pub fn convlstm_step_first(
    cell: &ConvLstmCell,
    x: &FeatureMap,
    h_out: &mut FeatureMap,
    c_out: &mut FeatureMap,
    buffers: &mut InferBuffers,
) -> Result<(), NnError> {
    let (height, width) = (x.height(), x.width());
    let ch = cell.c_hidden;
    if x.channels() != cell.c_input
        || !h_out.same_shape_dims(ch, height, width)
        || !c_out.same_shape_dims(ch, height, width)
    {
        return Err(NnError::ShapeMismatch(
            "first-step buffers do not match the cell shape".into(),
        ));
    }
    let hw = height * width;
    let n = ch * hw;
    let kernel = cell.gates.kernel();
    let q_full = (cell.c_input + ch) * kernel * kernel;
    let q_input = cell.c_input * kernel * kernel;

    let mut pre = match buffers.pre.take() {
        Some(p) if p.same_shape_dims(4 * ch, height, width) => p,
        _ => FeatureMap::zeros(4 * ch, height, width),
    };
    im2col_into(x, kernel, &mut buffers.cols);
    for o in 0..4 * ch {
        let b = cell.gates.bias[o];
        pre.data_mut()[o * hw..(o + 1) * hw]
            .iter_mut()
            .for_each(|v| *v = b);
    }
    gemm_acc(
        pre.data_mut(),
        &cell.gates.weights,
        q_full,
        &buffers.cols,
        4 * ch,
        q_input,
        hw,
    );

    for idx in 0..n {
        let gate_i = sigmoid(pre.data()[idx]);
        let gate_g = pre.data()[2 * n + idx].tanh();
        let gate_o = sigmoid(pre.data()[3 * n + idx]);
        let cv = gate_i * gate_g;
        c_out.data_mut()[idx] = cv;
        h_out.data_mut()[idx] = gate_o * cv.tanh();
    }
    buffers.pre = Some(pre);
    Ok(())
}

/// The inference step writing into caller-owned state maps and buffers.
pub fn convlstm_step_into(
    cell: &ConvLstmCell,
    x: &FeatureMap,
    h: &FeatureMap,
    c: &FeatureMap,
    h_out: &mut FeatureMap,
    c_out: &mut FeatureMap,
    buffers: &mut InferBuffers,
) -> Result<(), NnError> {
    cell.check_shapes(x, h, c)?;
    let (height, width) = (x.height(), x.width());
    let ch = cell.c_hidden;
    let n = ch * height * width;
    if !h_out.same_shape(h) || !c_out.same_shape(c) {
        return Err(NnError::ShapeMismatch(
            "state output buffers do not match the cell shape".into(),
        ));
    }

    buffers.concat.clear();
    buffers.concat.extend_from_slice(x.data());
    buffers.concat.extend_from_slice(h.data());
    let concat = FeatureMap::from_vec(
        cell.c_input + ch,
        height,
        width,
        std::mem::take(&mut buffers.concat),
    );
    let mut pre = match buffers.pre.take() {
        Some(p) if p.same_shape_dims(4 * ch, height, width) => p,
        _ => FeatureMap::zeros(4 * ch, height, width),
    };
    let conv = conv2d_forward_into(&concat, &cell.gates, &mut pre, &mut buffers.cols);
    buffers.concat = concat.into_data();
    conv?;

    for idx in 0..n {
        let gate_i = sigmoid(pre.data()[idx]);
        let gate_f = sigmoid(pre.data()[n + idx]);
        let gate_g = pre.data()[2 * n + idx].tanh();
        let gate_o = sigmoid(pre.data()[3 * n + idx]);
        let cv = gate_f * c.data()[idx] + gate_i * gate_g;
        c_out.data_mut()[idx] = cv;
        h_out.data_mut()[idx] = gate_o * cv.tanh();
    }
    buffers.pre = Some(pre);
    Ok(())
}

/// One recurrence step:
/// `i, f, o = sigmoid(conv slices)`, `g = tanh(conv slice)`,
/// `c' = f (.) c + i (.) g`, `h' = o (.) tanh(c')`.
pub fn convlstm_step(
    cell: &ConvLstmCell,
    x: &FeatureMap,
    h: &FeatureMap,
    c: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap, StepCache), NnError> {
    cell.check_shapes(x, h, c)?;
    let (height, width) = (x.height(), x.width());
    let hw = height * width;
    let ch = cell.c_hidden;

    let concat = x.concat_channels(h);
    let pre = conv2d_forward(&concat, &cell.gates)?;

    let mut gate_i = FeatureMap::zeros(ch, height, width);
    let mut gate_f = FeatureMap::zeros(ch, height, width);
    let mut gate_g = FeatureMap::zeros(ch, height, width);
    let mut gate_o = FeatureMap::zeros(ch, height, width);
    let n = ch * hw;
    for idx in 0..n {
        gate_i.data_mut()[idx] = sigmoid(pre.data()[idx]);
        gate_f.data_mut()[idx] = sigmoid(pre.data()[n + idx]);
        gate_g.data_mut()[idx] = pre.data()[2 * n + idx].tanh();
        gate_o.data_mut()[idx] = sigmoid(pre.data()[3 * n + idx]);
    }

    let mut c_new = FeatureMap::zeros(ch, height, width);
    let mut tanh_c_new = FeatureMap::zeros(ch, height, width);
    let mut h_new = FeatureMap::zeros(ch, height, width);
    for idx in 0..n {
        let cv = gate_f.data()[idx] * c.data()[idx] + gate_i.data()[idx] * gate_g.data()[idx];
        c_new.data_mut()[idx] = cv;
        let tc = cv.tanh();
        tanh_c_new.data_mut()[idx] = tc;
        h_new.data_mut()[idx] = gate_o.data()[idx] * tc;
    }

    let cache = StepCache {
        concat,
        gate_i,
        gate_f,
        gate_g,
        gate_o,
        c_prev: c.clone(),
        tanh_c_new,
    };
    Ok((h_new, c_new, cache))
}

/// Exact reverse-mode gradients through one step. Parameter gradients
/// accumulate into the cell (so unrolled sequences sum across steps);
/// returns `(grad_x, grad_h_prev, grad_c_prev)`.
pub fn convlstm_backward(
    cell: &mut ConvLstmCell,
    cache: &StepCache,
    grad_h_new: &FeatureMap,
    grad_c_new: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap, FeatureMap), NnError> {
    let ch = cell.c_hidden;
    let (height, width) = (cache.tanh_c_new.height(), cache.tanh_c_new.width());
    if !grad_h_new.same_shape(&cache.tanh_c_new) || !grad_c_new.same_shape(&cache.tanh_c_new) {
        return Err(NnError::ShapeMismatch(
            "upstream gradients do not match the step's state shape".into(),
        ));
    }
    let hw = height * width;
    let n = ch * hw;

    // Pre-activation gradients of the four gate blocks.
    let mut grad_pre = FeatureMap::zeros(4 * ch, height, width);
    for idx in 0..n {
        let tc = cache.tanh_c_new.data()[idx];
        let o = cache.gate_o.data()[idx];
        let i = cache.gate_i.data()[idx];
        let f = cache.gate_f.data()[idx];
        let g = cache.gate_g.data()[idx];
        let dh = grad_h_new.data()[idx];

        let d_o = dh * tc;
        let d_c_total = grad_c_new.data()[idx] + dh * o * (1.0 - tc * tc);
        let d_f = d_c_total * cache.c_prev.data()[idx];
        let d_i = d_c_total * g;
        let d_g = d_c_total * i;

        grad_pre.data_mut()[idx] = d_i * i * (1.0 - i);
        grad_pre.data_mut()[n + idx] = d_f * f * (1.0 - f);
        grad_pre.data_mut()[2 * n + idx] = d_g * (1.0 - g * g);
        grad_pre.data_mut()[3 * n + idx] = d_o * o * (1.0 - o);
    }

    let grad_concat = conv2d_backward(&cache.concat, &mut cell.gates, &grad_pre)?;

    let c_input = cell.c_input;
    let mut grad_x = FeatureMap::zeros(c_input, height, width);
    grad_x
        .data_mut()
        .copy_from_slice(&grad_concat.data()[..c_input * hw]);
    let mut grad_h_prev = FeatureMap::zeros(ch, height, width);
    grad_h_prev
        .data_mut()
        .copy_from_slice(&grad_concat.data()[c_input * hw..]);

    let mut grad_c_prev = FeatureMap::zeros(ch, height, width);
    for idx in 0..n {
        let tc = cache.tanh_c_new.data()[idx];
        let dh = grad_h_new.data()[idx];
        let d_c_total = grad_c_new.data()[idx] + dh * cache.gate_o.data()[idx] * (1.0 - tc * tc);
        grad_c_prev.data_mut()[idx] = d_c_total * cache.gate_f.data()[idx];
    }
    Ok((grad_x, grad_h_prev, grad_c_prev))
}
