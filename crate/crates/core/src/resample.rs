//! Cubic convolution resampling (Keys kernel, a = -0.5).

use crate::error::{invalid, Result};
use crate::filter::gaussian_blur_any_size;
use crate::image::{quantize, GrayImage, PadMode};

/// Kernel sharpness parameter of the cubic convolution kernel.
pub const CUBIC_A: f64 = -0.5;

/// Target geometry of a resize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSpec {
    /// Output/input linear scale used for the coordinate mapping.
    pub factor: f64,
    pub out_width: usize,
    pub out_height: usize,
}

impl ScaleSpec {
    /// Output dimensions `round(factor * input)`, at least 1.
    pub fn from_factor(factor: f64, in_width: usize, in_height: usize) -> Result<Self> {
        let dim = |d: usize| ((factor * d as f64).round() as usize).max(1);
        Self::with_dims(factor, dim(in_width), dim(in_height))
    }

    /// Explicit output dimensions with `factor` still driving the sample positions.
    pub fn with_dims(factor: f64, out_width: usize, out_height: usize) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(invalid(format!("scale factor must be positive, got {factor}")));
        }
        if out_width == 0 || out_height == 0 {
            return Err(invalid("output dimensions must be positive"));
        }
        Ok(Self { factor, out_width, out_height })
    }
}

/// Cubic convolution kernel W(t).
#[inline]
pub fn cubic_weight(t: f64) -> f64 {
    let a = CUBIC_A;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Centre-aligned source coordinate of output sample `out`.
#[inline]
pub fn source_coordinate(out: usize, factor: f64) -> f64 {
    (out as f64 + 0.5) / factor - 0.5
}

/// Four source taps and their weights for one output coordinate.
#[derive(Debug, Clone, Copy)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn taps(out_len: usize, in_len: usize, factor: f64) -> Vec<Taps> {
    (0..out_len)
        .map(|o| {
            let s = source_coordinate(o, factor);
            let base = s.floor();
            let mut t = Taps { index: [0; 4], weight: [0.0; 4] };
            for k in 0..4 {
                let pos = base as isize - 1 + k as isize;
                t.index[k] = pos.clamp(0, in_len as isize - 1) as usize;
                t.weight[k] = cubic_weight(s - pos as f64);
            }
            t
        })
        .collect()
}

pub fn bicubic_resize(img: &GrayImage, spec: &ScaleSpec) -> GrayImage {
    let cols = taps(spec.out_width, img.width(), spec.factor);
    let rows = taps(spec.out_height, img.height(), spec.factor);
    let mut out = Vec::with_capacity(spec.out_width * spec.out_height);
    for ry in &rows {
        for cx in &cols {
            let mut acc = 0.0;
            for ky in 0..4 {
                let line = img.row(ry.index[ky]);
                let mut row_acc = 0.0;
                for kx in 0..4 {
                    row_acc += cx.weight[kx] * line[cx.index[kx]] as f64;
                }
                acc += ry.weight[ky] * row_acc;
            }
            out.push(quantize(acc));
        }
    }
    GrayImage::new(spec.out_width, spec.out_height, out).expect("dimensions checked by ScaleSpec")
}

/// Upscales `img` by `factor` onto an explicit `width`x`height` grid.
pub fn upscale_to(img: &GrayImage, factor: usize, width: usize, height: usize) -> Result<GrayImage> {
    let spec = ScaleSpec::with_dims(factor as f64, width, height)?;
    Ok(bicubic_resize(img, &spec))
}

/// Synthesizes a low-resolution observation: optional Gaussian blur, then
/// bicubic decimation by `factor` to `ceil(dim / factor)`.
pub fn degrade(img: &GrayImage, factor: usize, blur_sigma: f64) -> Result<GrayImage> {
    if factor < 2 {
        return Err(invalid(format!("degradation factor must be >= 2, got {factor}")));
    }
    if !(blur_sigma >= 0.0) || !blur_sigma.is_finite() {
        return Err(invalid(format!("blur sigma must be non-negative, got {blur_sigma}")));
    }
    let src = if blur_sigma > 0.0 {
        gaussian_blur_any_size(&img.to_float(), blur_sigma, PadMode::Reflect)?.to_gray()
    } else {
        img.clone()
    };
    let spec = ScaleSpec::with_dims(1.0 / factor as f64, img.width().div_ceil(factor), img.height().div_ceil(factor))?;
    Ok(bicubic_resize(&src, &spec))
}

/// `degrade` followed by bicubic upscaling back onto the original grid: the
/// plain bicubic reconstruction every other method starts from.
pub fn degrade_restore(img: &GrayImage, factor: usize, blur_sigma: f64) -> Result<GrayImage> {
    let low = degrade(img, factor, blur_sigma)?;
    upscale_to(&low, factor, img.width(), img.height())
}
