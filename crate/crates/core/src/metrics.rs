//! Full-reference quality metrics: MSE, PSNR and mean SSIM.

use crate::error::{invalid, Error, Result};
use crate::image::GrayImage;

pub const DEFAULT_PEAK: u32 = 255;

/// MSE, PSNR and SSIM of one image pair. PSNR is `f64::INFINITY` for identical images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: u32,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, gaussian_sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 255 }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range as f64).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range as f64).powi(2)
    }

    /// Normalized 1-D Gaussian of length `window`.
    pub fn window_weights(&self) -> Vec<f64> {
        let r = (self.window / 2) as isize;
        let d = 2.0 * self.gaussian_sigma * self.gaussian_sigma;
        let mut w: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / d).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        w
    }
}

fn same_dims(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::Shape(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared error normalized by the pixel count.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    same_dims(a, b)?;
    let sum: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.pixels().len() as f64)
}

pub fn psnr_from_mse(mse: f64, peak: u32) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * ((peak as f64).powi(2) / mse).log10()
    }
}

pub fn psnr(a: &GrayImage, b: &GrayImage, peak: u32) -> Result<f64> {
    if peak == 0 {
        return Err(invalid("PSNR peak must be positive"));
    }
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

/// Mean SSIM over every position where the full Gaussian window fits.
///
/// Local moments are gathered with a separable pass over the five planes
/// `x, y, x^2, y^2, xy`.
pub fn ssim(a: &GrayImage, b: &GrayImage, params: &SsimParams) -> Result<f64> {
    same_dims(a, b)?;
    if params.window == 0 || params.window.is_multiple_of(2) {
        return Err(invalid(format!("SSIM window must be odd, got {}", params.window)));
    }
    let (w, h) = a.dimensions();
    let n = params.window;
    if w < n || h < n {
        return Err(invalid(format!("image {w}x{h} smaller than the {n}x{n} SSIM window")));
    }
    let g = params.window_weights();
    let (ow, oh) = (w - n + 1, h - n + 1);

    // Horizontal pass: each plane becomes h x ow.
    let mut planes = vec![vec![0.0f64; h * ow]; 5];
    for y in 0..h {
        let ra = a.row(y);
        let rb = b.row(y);
        for x in 0..ow {
            let mut acc = [0.0f64; 5];
            for (k, &wk) in g.iter().enumerate() {
                let p = ra[x + k] as f64;
                let q = rb[x + k] as f64;
                acc[0] += wk * p;
                acc[1] += wk * q;
                acc[2] += wk * p * p;
                acc[3] += wk * q * q;
                acc[4] += wk * p * q;
            }
            for (plane, v) in planes.iter_mut().zip(acc) {
                plane[y * ow + x] = v;
            }
        }
    }

    let (c1, c2) = (params.c1(), params.c2());
    let mut total = 0.0;
    for y in 0..oh {
        for x in 0..ow {
            let mut m = [0.0f64; 5];
            for (k, &wk) in g.iter().enumerate() {
                let idx = (y + k) * ow + x;
                for (mi, plane) in m.iter_mut().zip(&planes) {
                    *mi += wk * plane[idx];
                }
            }
            total += ssim_from_moments(m, c1, c2);
        }
    }
    Ok((total / (ow * oh) as f64).clamp(-1.0, 1.0))
}

/// SSIM of one window from weighted moments `[E x, E y, E x^2, E y^2, E xy]`.
#[inline]
pub(crate) fn ssim_from_moments(m: [f64; 5], c1: f64, c2: f64) -> f64 {
    let (mx, my) = (m[0], m[1]);
    let vx = m[2] - mx * mx;
    let vy = m[3] - my * my;
    let cxy = m[4] - mx * my;
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

pub fn score(reference: &GrayImage, test: &GrayImage, peak: u32, params: &SsimParams) -> Result<QualityScore> {
    let m = mse(reference, test)?;
    Ok(QualityScore { mse: m, psnr_db: psnr_from_mse(m, peak), ssim: ssim(reference, test, params)? })
}
