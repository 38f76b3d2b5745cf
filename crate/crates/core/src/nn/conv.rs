//! Same-size 2-D convolution with zero padding, lowered to GEMM via im2col.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    ReLU,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::ReLU => 0,
            Activation::Linear => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::ReLU),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// Square-kernel convolution layer. Weights are laid out `out x in x f x f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize, activation: Activation) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_size,
            weights: vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            biases: vec![0.0; out_channels],
            activation,
        }
    }

    /// Inputs per output unit, `in_channels * f * f`.
    #[inline]
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    #[inline]
    pub fn weight_index(&self, o: usize, c: usize, i: usize, j: usize) -> usize {
        ((o * self.in_channels + c) * self.kernel_size + i) * self.kernel_size + j
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_channels == 0 || self.in_channels == 0 {
            return Err(Error::Validation("layer channel counts must be positive".into()));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Validation(format!("kernel size must be odd, got {}", self.kernel_size)));
        }
        if self.weights.len() != self.out_channels * self.fan_in() || self.biases.len() != self.out_channels {
            return Err(Error::Validation("parameter buffer sizes do not match layer shape".into()));
        }
        if self.weights.iter().chain(&self.biases).any(|v| !v.is_finite()) {
            return Err(Error::Validation("layer parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Gradients of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &ConvLayer) -> Self {
        Self { weights: vec![0.0; layer.weights.len()], biases: vec![0.0; layer.biases.len()] }
    }
}

/// Upper bound on im2col columns materialized at once.
const CHUNK_COLUMNS: usize = 1 << 14;

fn rows_per_chunk(width: usize) -> usize {
    (CHUNK_COLUMNS / width).max(1)
}

/// Writes the `(c, i, j)`-major patch matrix for output rows `y0..y1`.
fn im2col(input: &Tensor, f: usize, y0: usize, y1: usize, cols: &mut [f64]) {
    let (ch, h, w) = input.shape();
    let p = f / 2;
    let n = (y1 - y0) * w;
    for c in 0..ch {
        let plane = input.plane(c);
        for i in 0..f {
            for j in 0..f {
                let row = &mut cols[((c * f + i) * f + j) * n..][..n];
                // Valid x range where x + j - p lies inside the image.
                let x_lo = p.saturating_sub(j);
                let x_hi = (w + p).saturating_sub(j).min(w);
                for y in y0..y1 {
                    let dst = &mut row[(y - y0) * w..(y - y0 + 1) * w];
                    let sy = y as isize + i as isize - p as isize;
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    dst[..x_lo].fill(0.0);
                    dst[x_hi..].fill(0.0);
                    dst[x_lo..x_hi].copy_from_slice(&src[x_lo + j - p..x_hi + j - p]);
                }
            }
        }
    }
}

/// Adds the patch-matrix gradient back onto the input gradient (inverse of [`im2col`]).
fn col2im(cols: &[f64], f: usize, y0: usize, y1: usize, grad: &mut Tensor) {
    let (ch, h, w) = grad.shape();
    let p = f / 2;
    let n = (y1 - y0) * w;
    let data = grad.data_mut();
    for c in 0..ch {
        for i in 0..f {
            for j in 0..f {
                let row = &cols[((c * f + i) * f + j) * n..][..n];
                let x_lo = p.saturating_sub(j);
                let x_hi = (w + p).saturating_sub(j).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in y0..y1 {
                    let sy = y as isize + i as isize - p as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[(y - y0) * w + x_lo..(y - y0) * w + x_hi];
                    let base = (c * h + sy as usize) * w;
                    let dst = &mut data[base + x_lo + j - p..base + x_hi + j - p];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// `C (m x n) = alpha * A (m x k) * B (k x n) + beta * C`, all views given by strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the debug assertions above spell out the bounds every caller upholds:
    // the last addressed element of each view lies inside its slice.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

fn check_input(input: &Tensor, layer: &ConvLayer) -> Result<()> {
    if input.channels() != layer.in_channels {
        return Err(Error::Shape(format!(
            "layer expects {} input channels, got {}",
            layer.in_channels,
            input.channels()
        )));
    }
    Ok(())
}

/// Layers with fewer output channels than this skip im2col: a GEMM with a
/// handful of rows spends most of its time packing the patch matrix.
const DIRECT_BELOW: usize = 4;

/// Visits every kernel tap with the output columns `x_lo..x_hi` whose source
/// column `x + j - p` lies inside the image.
fn for_each_tap(f: usize, w: usize, mut visit: impl FnMut(usize, usize, usize, usize)) {
    let p = f / 2;
    for i in 0..f {
        for j in 0..f {
            let x_lo = p.saturating_sub(j);
            let x_hi = (w + p).saturating_sub(j).min(w);
            if x_lo < x_hi {
                visit(i, j, x_lo, x_hi);
            }
        }
    }
}

/// Output rows `y` whose source row `y + i - p` lies inside the image.
fn valid_rows(i: usize, p: usize, h: usize) -> std::ops::Range<usize> {
    p.saturating_sub(i)..(h + p).saturating_sub(i).min(h)
}

fn forward_direct(input: &Tensor, layer: &ConvLayer, out: &mut [f64]) {
    let (ch, h, w) = input.shape();
    let f = layer.kernel_size;
    let p = f / 2;
    for (o, out_plane) in out.chunks_exact_mut(h * w).enumerate() {
        for c in 0..ch {
            let plane = input.plane(c);
            for_each_tap(f, w, |i, j, x_lo, x_hi| {
                let wt = layer.weights[layer.weight_index(o, c, i, j)];
                for y in valid_rows(i, p, h) {
                    let src = &plane[(y + i - p) * w + x_lo + j - p..(y + i - p) * w + x_hi + j - p];
                    let dst = &mut out_plane[y * w + x_lo..y * w + x_hi];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += wt * s;
                    }
                }
            });
        }
    }
}

fn backward_direct(
    input: &Tensor,
    layer: &ConvLayer,
    g: &[f64],
    grads: &mut LayerGrads,
    grad_input: Option<&mut Tensor>,
) {
    let (ch, h, w) = input.shape();
    let f = layer.kernel_size;
    let p = f / 2;
    let mut grad_input = grad_input;
    for (o, g_plane) in g.chunks_exact(h * w).enumerate() {
        for c in 0..ch {
            let plane = input.plane(c);
            for_each_tap(f, w, |i, j, x_lo, x_hi| {
                let idx = layer.weight_index(o, c, i, j);
                let wt = layer.weights[idx];
                let mut acc = 0.0;
                for y in valid_rows(i, p, h) {
                    let src = (y + i - p) * w + x_lo + j - p;
                    let go = &g_plane[y * w + x_lo..y * w + x_hi];
                    acc += go.iter().zip(&plane[src..src + go.len()]).map(|(a, b)| a * b).sum::<f64>();
                    if let Some(gi) = grad_input.as_deref_mut() {
                        let dst = &mut gi.data_mut()[c * h * w + src..][..go.len()];
                        for (d, s) in dst.iter_mut().zip(go) {
                            *d += wt * s;
                        }
                    }
                }
                grads.weights[idx] += acc;
            });
        }
    }
}

fn forward_gemm(input: &Tensor, layer: &ConvLayer, out: &mut [f64]) {
    let (_, h, w) = input.shape();
    let hw = h * w;
    let f = layer.kernel_size;
    let k = layer.fan_in();
    let oc = layer.out_channels;
    if f == 1 {
        // The input already is the patch matrix.
        gemm(oc, k, hw, &layer.weights, (k, 1), input.data(), (hw, 1), 0.0, out, (hw, 1));
    } else {
        let step = rows_per_chunk(w);
        let mut cols = vec![0.0; k * step * w];
        let mut y0 = 0;
        while y0 < h {
            let y1 = (y0 + step).min(h);
            let n = (y1 - y0) * w;
            im2col(input, f, y0, y1, &mut cols[..k * n]);
            gemm(oc, k, n, &layer.weights, (k, 1), &cols[..k * n], (n, 1), 0.0, &mut out[y0 * w..], (hw, 1));
            y0 = y1;
        }
    }
}

fn backward_gemm(
    input: &Tensor,
    layer: &ConvLayer,
    g: &[f64],
    grads: &mut LayerGrads,
    grad_input: Option<&mut Tensor>,
) {
    let (_, h, w) = input.shape();
    let hw = h * w;
    let f = layer.kernel_size;
    let k = layer.fan_in();
    let oc = layer.out_channels;
    let mut grad_input = grad_input;
    if f == 1 {
        gemm(oc, hw, k, g, (hw, 1), input.data(), (1, hw), 1.0, &mut grads.weights, (k, 1));
        if let Some(gi) = grad_input.as_mut() {
            gemm(k, oc, hw, &layer.weights, (1, k), g, (hw, 1), 0.0, gi.data_mut(), (hw, 1));
        }
    } else {
        let step = rows_per_chunk(w);
        let mut cols = vec![0.0; k * step * w];
        let mut y0 = 0;
        while y0 < h {
            let y1 = (y0 + step).min(h);
            let n = (y1 - y0) * w;
            let cols = &mut cols[..k * n];
            im2col(input, f, y0, y1, cols);
            let g_chunk = &g[y0 * w..];
            gemm(oc, n, k, g_chunk, (hw, 1), cols, (1, n), 1.0, &mut grads.weights, (k, 1));
            if let Some(gi) = grad_input.as_mut() {
                gemm(k, oc, n, &layer.weights, (1, k), g_chunk, (hw, 1), 0.0, cols, (n, 1));
                col2im(cols, f, y0, y1, gi);
            }
            y0 = y1;
        }
    }
}

/// `out[o][y][x] = act(bias[o] + sum_{c,i,j} w[o][c][i][j] * in[c][y+i-p][x+j-p])`, zero padded.
pub fn conv2d_forward(input: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    check_input(input, layer)?;
    let (_, h, w) = input.shape();
    let hw = h * w;
    let oc = layer.out_channels;
    let mut out = vec![0.0; oc * hw];
    if oc < DIRECT_BELOW {
        forward_direct(input, layer, &mut out);
    } else {
        forward_gemm(input, layer, &mut out);
    }
    for (o, plane) in out.chunks_exact_mut(hw).enumerate() {
        let b = layer.biases[o];
        match layer.activation {
            Activation::ReLU => plane.iter_mut().for_each(|v| *v = (*v + b).max(0.0)),
            Activation::Linear => plane.iter_mut().for_each(|v| *v += b),
        }
    }
    Ok(Tensor::from_raw(oc, h, w, out))
}

/// Gradients of a layer given its input, its (post-activation) output and
/// the loss gradient with respect to that output. Weight and bias gradients
/// are accumulated into `grads`; the input gradient is returned when asked for.
pub(crate) fn backward_accumulate(
    input: &Tensor,
    layer: &ConvLayer,
    output: &Tensor,
    grad_out: &Tensor,
    grads: &mut LayerGrads,
    want_input_grad: bool,
) -> Result<Option<Tensor>> {
    check_input(input, layer)?;
    let (_, h, w) = input.shape();
    if grad_out.shape() != (layer.out_channels, h, w) || output.shape() != grad_out.shape() {
        return Err(Error::Shape(format!(
            "output gradient shape {:?} does not match layer output ({}, {}, {})",
            grad_out.shape(),
            layer.out_channels,
            h,
            w
        )));
    }
    let hw = h * w;

    // Pre-activation gradient; ReLU'(0) is taken as 0.
    let g: Vec<f64> = match layer.activation {
        Activation::Linear => grad_out.data().to_vec(),
        Activation::ReLU => {
            grad_out.data().iter().zip(output.data()).map(|(&d, &y)| if y > 0.0 { d } else { 0.0 }).collect()
        }
    };
    for (o, plane) in g.chunks_exact(hw).enumerate() {
        grads.biases[o] += plane.iter().sum::<f64>();
    }

    let mut grad_input = want_input_grad.then(|| Tensor::zeros(layer.in_channels, h, w));
    if layer.out_channels < DIRECT_BELOW {
        backward_direct(input, layer, &g, grads, grad_input.as_mut());
    } else {
        backward_gemm(input, layer, &g, grads, grad_input.as_mut());
    }
    Ok(grad_input)
}

/// Exact gradients of [`conv2d_forward`] (activation included) with respect
/// to the input, the weights and the biases.
pub fn conv2d_backward(input: &Tensor, layer: &ConvLayer, grad_out: &Tensor) -> Result<(Tensor, LayerGrads)> {
    let output = conv2d_forward(input, layer)?;
    let mut grads = LayerGrads::zeros_like(layer);
    let gi = backward_accumulate(input, layer, &output, grad_out, &mut grads, true)?.expect("input gradient requested");
    Ok((gi, grads))
}
