//! 2D convolution with zero same-padding and its exact reverse-mode
//! gradients.
//!
//! The forward and both backward passes are written as patch-matrix
//! products (im2col) so the inner loops run over contiguous pixel rows.

use super::{FeatureMap, NnError};
use crate::rng::StreamRng;

/// A convolution layer with square odd kernel and zero same-padding, so
/// output spatial size always equals input spatial size. Gradients
/// accumulate into the layer until [`Conv2dLayer::zero_grad`].
#[derive(Debug, Clone)]
pub struct Conv2dLayer {
    c_out: usize,
    c_in: usize,
    kernel: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

impl Conv2dLayer {
    pub fn new(c_out: usize, c_in: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd for same-padding");
        Conv2dLayer {
            c_out,
            c_in,
            kernel,
            weights: vec![0.0; c_out * c_in * kernel * kernel],
            bias: vec![0.0; c_out],
            grad_weights: vec![0.0; c_out * c_in * kernel * kernel],
            grad_bias: vec![0.0; c_out],
        }
    }

    /// Uniform `+-1/sqrt(fan_in)` weights, zero bias. Weights are drawn
    /// in index order, then biases, so a seed fixes the layer exactly.
    pub fn init_uniform(&mut self, rng: &mut StreamRng) {
        let bound = 1.0 / ((self.c_in * self.kernel * self.kernel) as f64).sqrt();
        for w in self.weights.iter_mut() {
            *w = rng.uniform(-bound, bound);
        }
        for b in self.bias.iter_mut() {
            *b = 0.0;
        }
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.iter_mut().for_each(|g| *g = 0.0);
        self.grad_bias.iter_mut().for_each(|g| *g = 0.0);
    }

    #[inline]
    fn weight_index(&self, o: usize, c: usize, dy: usize, dx: usize) -> usize {
        ((o * self.c_in + c) * self.kernel + dy) * self.kernel + dx
    }

    pub fn weight(&self, o: usize, c: usize, dy: usize, dx: usize) -> f64 {
        self.weights[self.weight_index(o, c, dy, dx)]
    }

    pub fn set_weight(&mut self, o: usize, c: usize, dy: usize, dx: usize, v: f64) {
        let i = self.weight_index(o, c, dy, dx);
        self.weights[i] = v;
    }
}

/// Patch matrix: row `q = (c * k + dy) * k + dx` holds, for every output
/// pixel, the input value the kernel tap `q` sees (zero outside the grid).
pub(crate) fn im2col_into(x: &FeatureMap, kernel: usize, cols: &mut Vec<f64>) {
    let (c_in, h, w) = (x.channels(), x.height(), x.width());
    let pad = (kernel / 2) as isize;
    let hw = h * w;
    let needed = c_in * kernel * kernel * hw;
    if cols.len() == needed {
        cols.iter_mut().for_each(|v| *v = 0.0);
    } else {
        cols.clear();
        cols.resize(needed, 0.0);
    }
    for c in 0..c_in {
        let plane = x.channel(c);
        for dy in 0..kernel {
            let sy = dy as isize - pad;
            for dx in 0..kernel {
                let sx = dx as isize - pad;
                let row = &mut cols[((c * kernel + dy) * kernel + dx) * hw..][..hw];
                let y0 = (-sy).max(0) as usize;
                let y1 = ((h as isize - sy).min(h as isize)).max(0) as usize;
                let x0 = (-sx).max(0) as usize;
                let x1 = ((w as isize - sx).min(w as isize)).max(0) as usize;
                for y in y0..y1 {
                    let src = (y as isize + sy) * w as isize + sx;
                    row[y * w + x0..y * w + x1].copy_from_slice(
                        &plane[(src + x0 as isize) as usize..(src + x1 as isize) as usize],
                    );
                }
            }
        }
    }
}

/// Scatters a patch-matrix gradient back onto the input grid.
fn col2im(cols: &[f64], c_in: usize, h: usize, w: usize, kernel: usize) -> FeatureMap {
    let pad = (kernel / 2) as isize;
    let hw = h * w;
    let mut out = FeatureMap::zeros(c_in, h, w);
    for c in 0..c_in {
        for dy in 0..kernel {
            let sy = dy as isize - pad;
            for dx in 0..kernel {
                let sx = dx as isize - pad;
                let row = &cols[((c * kernel + dy) * kernel + dx) * hw..][..hw];
                let y0 = (-sy).max(0) as usize;
                let y1 = ((h as isize - sy).min(h as isize)).max(0) as usize;
                let x0 = (-sx).max(0) as usize;
                let x1 = ((w as isize - sx).min(w as isize)).max(0) as usize;
                let plane_off = (c * hw) as isize;
                for y in y0..y1 {
                    let dst = plane_off + (y as isize + sy) * w as isize + sx;
                    let data = out.data_mut();
                    for xx in x0..x1 {
                        data[(dst + xx as isize) as usize] += row[y * w + xx];
                    }
                }
            }
        }
    }
    out
}

/// `out += a (m x q_len, row stride `a_stride`) . b (q_len x hw)`.
///
/// Two output rows at a time with a register-resident column tile; common
/// narrow grids get a full-width tile so the accumulators never spill.
pub(crate) fn gemm_acc(
    out: &mut [f64],
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    m: usize,
    q_len: usize,
    hw: usize,
) {
    match hw {
        8 => gemm_tiles::<8>(out, a, a_stride, b, m, q_len, hw),
        12 => gemm_tiles::<12>(out, a, a_stride, b, m, q_len, hw),
        20 => gemm_tiles::<20>(out, a, a_stride, b, m, q_len, hw),
        24 => gemm_tiles::<24>(out, a, a_stride, b, m, q_len, hw),
        _ => gemm_tiles::<16>(out, a, a_stride, b, m, q_len, hw),
    }
}

fn gemm_tiles<const T: usize>(
    out: &mut [f64],
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    m: usize,
    q_len: usize,
    hw: usize,
) {
    let full = hw - hw % T;
    let mut row = 0;
    while row + 2 <= m {
        let (dst0, dst1) = out[row * hw..].split_at_mut(hw);
        let dst1 = &mut dst1[..hw];
        let a0_row = &a[row * a_stride..][..q_len];
        let a1_row = &a[(row + 1) * a_stride..][..q_len];
        let mut col = 0;
        while col < full {
            let mut acc0 = [0.0f64; T];
            let mut acc1 = [0.0f64; T];
            for q in 0..q_len {
                let v0 = a0_row[q];
                let v1 = a1_row[q];
                let src = &b[q * hw + col..][..T];
                for j in 0..T {
                    acc0[j] += v0 * src[j];
                    acc1[j] += v1 * src[j];
                }
            }
            for j in 0..T {
                dst0[col + j] += acc0[j];
                dst1[col + j] += acc1[j];
            }
            col += T;
        }
        for col in full..hw {
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for q in 0..q_len {
                let v = b[q * hw + col];
                s0 += a0_row[q] * v;
                s1 += a1_row[q] * v;
            }
            dst0[col] += s0;
            dst1[col] += s1;
        }
        row += 2;
    }
    if row < m {
        let dst = &mut out[row * hw..][..hw];
        let a_row = &a[row * a_stride..][..q_len];
        for q in 0..q_len {
            let v = a_row[q];
            let src = &b[q * hw..][..hw];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += v * s;
            }
        }
    }
}

/// Convolution with zero same-padding:
/// `out[o, y, x] = bias[o] + sum w[o, c, dy, dx] * x[c, y + dy - p, x + dx - p]`.
pub fn conv2d_forward(x: &FeatureMap, layer: &Conv2dLayer) -> Result<FeatureMap, NnError> {
    let mut out = FeatureMap::zeros(layer.c_out, x.height(), x.width());
    let mut cols = Vec::new();
    conv2d_forward_into(x, layer, &mut out, &mut cols)?;
    Ok(out)
}

/// [`conv2d_forward`] writing into a caller-owned output map and patch
/// buffer, so inference loops can reuse their allocations.
pub fn conv2d_forward_into(
    x: &FeatureMap,
    layer: &Conv2dLayer,
    out: &mut FeatureMap,
    cols: &mut Vec<f64>,
) -> Result<(), NnError> {
    if x.channels() != layer.c_in {
        return Err(NnError::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            layer.c_in,
            x.channels()
        )));
    }
    let (h, w) = (x.height(), x.width());
    if out.channels() != layer.c_out || out.height() != h || out.width() != w {
        return Err(NnError::ShapeMismatch(format!(
            "output buffer is {}x{}x{}, expected {}x{h}x{w}",
            out.channels(),
            out.height(),
            out.width(),
            layer.c_out
        )));
    }
    let hw = h * w;
    let q_len = layer.c_in * layer.kernel * layer.kernel;
    im2col_into(x, layer.kernel, cols);
    for o in 0..layer.c_out {
        let b = layer.bias[o];
        out.data_mut()[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v = b);
    }
    gemm_acc(out.data_mut(), &layer.weights, q_len, cols, layer.c_out, q_len, hw);
    Ok(())
}

/// Exact gradients of [`conv2d_forward`]: returns the input gradient and
/// accumulates parameter gradients into the layer.
pub fn conv2d_backward(
    x: &FeatureMap,
    layer: &mut Conv2dLayer,
    grad_out: &FeatureMap,
) -> Result<FeatureMap, NnError> {
    if x.channels() != layer.c_in {
        return Err(NnError::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            layer.c_in,
            x.channels()
        )));
    }
    if grad_out.channels() != layer.c_out
        || grad_out.height() != x.height()
        || grad_out.width() != x.width()
    {
        return Err(NnError::ShapeMismatch(format!(
            "output gradient is {}x{}x{}, expected {}x{}x{}",
            grad_out.channels(),
            grad_out.height(),
            grad_out.width(),
            layer.c_out,
            x.height(),
            x.width()
        )));
    }
    let (h, w) = (x.height(), x.width());
    let hw = h * w;
    let q_len = layer.c_in * layer.kernel * layer.kernel;
    let mut cols = Vec::new();
    im2col_into(x, layer.kernel, &mut cols);

    for o in 0..layer.c_out {
        layer.grad_bias[o] += grad_out.channel(o).iter().sum::<f64>();
    }

    // grad_w = grad_out . cols^T, accumulated into the layer.
    let mut cols_t = vec![0.0; hw * q_len];
    for q in 0..q_len {
        for px in 0..hw {
            cols_t[px * q_len + q] = cols[q * hw + px];
        }
    }
    gemm_acc(
        &mut layer.grad_weights,
        grad_out.data(),
        hw,
        &cols_t,
        layer.c_out,
        hw,
        q_len,
    );

    // grad_cols = weights^T . grad_out, then scatter back onto the grid.
    let mut weights_t = vec![0.0; q_len * layer.c_out];
    for o in 0..layer.c_out {
        for q in 0..q_len {
            weights_t[q * layer.c_out + o] = layer.weights[o * q_len + q];
        }
    }
    let mut grad_cols = vec![0.0; q_len * hw];
    gemm_acc(
        &mut grad_cols,
        &weights_t,
        layer.c_out,
        grad_out.data(),
        q_len,
        layer.c_out,
        hw,
    );
    Ok(col2im(&grad_cols, layer.c_in, h, w, layer.kernel))
}
