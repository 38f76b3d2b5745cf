//! Raster types shared by every stage of the pipeline.

use crate::error::{invalid, Error, Result};

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "pixel buffer has {} entries, expected {}x{}={}",
                pixels.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// Image filled with a single value.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Applies a per-pixel lookup table.
    pub fn map_lut(&self, lut: &[u8; 256]) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| lut[v as usize]).collect(),
        }
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage { width: self.width, height: self.height, values: self.pixels.iter().map(|&v| v as f64).collect() }
    }

    /// Places `right` next to `self`, top-aligned, padding the shorter one with black.
    pub fn side_by_side(&self, right: &GrayImage) -> GrayImage {
        let width = self.width + right.width;
        let height = self.height.max(right.height);
        let mut pixels = vec![0u8; width * height];
        for y in 0..height {
            let dst = &mut pixels[y * width..(y + 1) * width];
            if y < self.height {
                dst[..self.width].copy_from_slice(self.row(y));
            }
            if y < right.height {
                dst[self.width..].copy_from_slice(right.row(y));
            }
        }
        GrayImage { width, height, pixels }
    }
}

/// Rounds half away from zero and clamps into the 8-bit range.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Double-precision raster used for intermediate results.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "value buffer has {} entries, expected {}",
                values.len(),
                width * height
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("float image contains non-finite values"));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage { width: self.width, height: self.height, pixels: self.values.iter().map(|&v| quantize(v)).collect() }
    }

    /// Extracts the `width`x`height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<FloatImage> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(invalid("crop window exceeds image bounds"));
        }
        let mut values = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let start = y * self.width + x0;
            values.extend_from_slice(&self.values[start..start + width]);
        }
        FloatImage::new(width, height, values)
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> FloatImage {
        debug_assert_eq!(values.len(), width * height);
        FloatImage { width, height, values }
    }
}

/// Border extension policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    /// Mirror about the edge pixel without repeating it: index -1 maps to 1.
    Reflect,
    /// Clamp to the nearest edge pixel.
    Replicate,
    /// Fill with 0.
    Zero,
}

/// Maps a possibly out-of-range coordinate into `0..len` per `mode`.
/// Returns `None` for [`PadMode::Zero`] outside the range.
#[inline]
pub fn border_index(i: isize, len: usize, mode: PadMode) -> Option<usize> {
    let n = len as isize;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match mode {
        PadMode::Zero => None,
        PadMode::Replicate => Some(i.clamp(0, n - 1) as usize),
        PadMode::Reflect => {
            if n == 1 {
                return Some(0);
            }
            let period = 2 * (n - 1);
            let mut m = i.rem_euclid(period);
            if m >= n {
                m = period - m;
            }
            Some(m as usize)
        }
    }
}

/// Extends `img` by `margin` pixels on every side.
pub fn pad(img: &FloatImage, margin: usize, mode: PadMode) -> Result<FloatImage> {
    if margin == 0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width, img.height);
    if mode == PadMode::Reflect && margin >= w.min(h) {
        return Err(invalid(format!(
            "reflect margin {margin} requires an image larger than {margin} in both dimensions, got {w}x{h}"
        )));
    }
    Ok(pad_unchecked(img, margin, mode))
}

/// [`pad`] without the reflect margin check; reflection repeats for large margins.
pub(crate) fn pad_unchecked(img: &FloatImage, margin: usize, mode: PadMode) -> FloatImage {
    let (w, h) = (img.width, img.height);
    let pw = w + 2 * margin;
    let ph = h + 2 * margin;
    let m = margin as isize;
    let mut values = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let sy = border_index(py as isize - m, h, mode);
        for px in 0..pw {
            let sx = border_index(px as isize - m, w, mode);
            values.push(match (sx, sy) {
                (Some(sx), Some(sy)) => img.values[sy * w + sx],
                _ => 0.0,
            });
        }
    }
    FloatImage::from_raw(pw, ph, values)
}
