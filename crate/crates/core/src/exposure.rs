//! Histogram-based exposure assessment and intensity equalization.

use crate::error::{invalid, Result};
use crate::image::GrayImage;

/// Default dominance ratio for [`classify_exposure`].
pub const DEFAULT_EXPOSURE_THRESHOLD: f64 = 0.75;

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; 256],
    total: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Self { bins: [0; 256], total: 0 }
    }
}

impl Histogram {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        let total = bins.iter().sum();
        Self { bins, total }
    }

    #[inline]
    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }

    #[inline]
    pub fn add(&mut self, v: u8) {
        self.bins[v as usize] += 1;
        self.total += 1;
    }

    #[inline]
    pub fn remove(&mut self, v: u8) {
        debug_assert!(self.bins[v as usize] > 0);
        self.bins[v as usize] -= 1;
        self.total -= 1;
    }

    /// Count of samples with value `<= v`.
    pub fn cumulative(&self, v: u8) -> u64 {
        self.bins[..=v as usize].iter().sum()
    }

    pub(crate) fn bins_mut(&mut self) -> &mut [u64; 256] {
        &mut self.bins
    }
}

pub fn histogram(img: &GrayImage) -> Histogram {
    let mut h = Histogram::default();
    for &p in img.pixels() {
        h.bins[p as usize] += 1;
    }
    h.total = img.pixels().len() as u64;
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExposureClass {
    UnderExposed,
    OverExposed,
    Normal,
}

impl ExposureClass {
    pub fn short_name(self) -> &'static str {
        match self {
            ExposureClass::UnderExposed => "Under",
            ExposureClass::OverExposed => "Over",
            ExposureClass::Normal => "Normal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureReport {
    pub class: ExposureClass,
    /// Fraction of pixels with intensity <= 127.
    pub lower_mass: f64,
    /// Fraction of pixels with intensity >= 128.
    pub upper_mass: f64,
    pub threshold: f64,
}

/// Labels an image by which half of the intensity scale holds at least
/// `threshold` of its pixels. Ties at the threshold go to the skewed class.
pub fn classify_exposure(img: &GrayImage, threshold: f64) -> Result<ExposureReport> {
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(invalid(format!("exposure threshold must lie in (0.5, 1], got {threshold}")));
    }
    let h = histogram(img);
    let lower = h.cumulative(127);
    let upper = h.total - lower;
    let lower_mass = lower as f64 / h.total as f64;
    let upper_mass = upper as f64 / h.total as f64;
    let class = if lower_mass >= threshold {
        ExposureClass::UnderExposed
    } else if upper_mass >= threshold {
        ExposureClass::OverExposed
    } else {
        ExposureClass::Normal
    };
    Ok(ExposureReport { class, lower_mass, upper_mass, threshold })
}

/// `round(255 * count / total)` with ties rounded up, in exact integer arithmetic.
#[inline]
pub(crate) fn scale_to_255(count: u64, total: u64) -> u8 {
    ((510 * count + total) / (2 * total)) as u8
}

/// Global histogram equalization transfer table: `T(v) = round(255 * cdf(v))`.
pub fn equalization_lut(h: &Histogram) -> [u8; 256] {
    let mut lut = [0u8; 256];
    let mut acc = 0u64;
    for (v, &count) in h.bins.iter().enumerate() {
        acc += count;
        lut[v] = scale_to_255(acc, h.total);
    }
    lut
}

pub fn equalize(img: &GrayImage) -> GrayImage {
    img.map_lut(&equalization_lut(&histogram(img)))
}

/// Linear stretch of `[min, max]` onto `[0, 255]`. Constant images are returned unchanged.
pub fn stretch_min_max(img: &GrayImage) -> GrayImage {
    let lo = *img.pixels().iter().min().expect("non-empty image") as u64;
    let hi = *img.pixels().iter().max().expect("non-empty image") as u64;
    if lo == hi {
        return img.clone();
    }
    let mut lut = [0u8; 256];
    for v in lo..=hi {
        lut[v as usize] = scale_to_255(v - lo, hi - lo);
    }
    img.map_lut(&lut)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EqualizeMode {
    #[default]
    HistEq,
    MinMax,
}

pub fn normalize(img: &GrayImage, mode: EqualizeMode) -> GrayImage {
    match mode {
        EqualizeMode::HistEq => equalize(img),
        EqualizeMode::MinMax => stretch_min_max(img),
    }
}
