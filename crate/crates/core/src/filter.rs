//! Gaussian smoothing.

use crate::error::{invalid, Result};
use crate::image::{pad, pad_unchecked, FloatImage, PadMode};

/// Sampled Gaussian truncated at 3 sigma, `2 * ceil(3 * sigma) + 1` taps summing to 1.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-radius..=radius).map(|x| (-((x * x) as f64) / denom).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Separable Gaussian blur: horizontal pass, then vertical pass, over an image
/// padded by the kernel radius with `mode`.
pub fn gaussian_blur(img: &FloatImage, sigma: f64, mode: PadMode) -> Result<FloatImage> {
    let kernel = gaussian_kernel(sigma)?;
    let padded = pad(img, kernel.len() / 2, mode)?;
    Ok(convolve_separable(img, &padded, &kernel))
}

/// Blur that never fails on small images: reflection repeats when the kernel
/// radius exceeds the image size.
pub(crate) fn gaussian_blur_any_size(img: &FloatImage, sigma: f64, mode: PadMode) -> Result<FloatImage> {
    let kernel = gaussian_kernel(sigma)?;
    let padded = pad_unchecked(img, kernel.len() / 2, mode);
    Ok(convolve_separable(img, &padded, &kernel))
}

fn convolve_separable(img: &FloatImage, padded: &FloatImage, kernel: &[f64]) -> FloatImage {
    let radius = kernel.len() / 2;
    let (w, h) = (img.width(), img.height());
    let pw = padded.width();
    let src = padded.values();

    // Horizontal pass keeps the padded rows so the vertical pass has its margin.
    let rows = h + 2 * radius;
    let mut horiz = vec![0.0; rows * w];
    for y in 0..rows {
        let line = &src[y * pw..(y + 1) * pw];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &c) in kernel.iter().enumerate() {
                acc += c * line[x + k];
            }
            horiz[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, &c) in kernel.iter().enumerate() {
            let line = &horiz[(y + k) * w..(y + k + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(line) {
                *d += c * s;
            }
        }
    }
    FloatImage::from_raw(w, h, out)
}
