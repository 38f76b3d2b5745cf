use crate::error::{invalid, Result};
use crate::filter::gaussian_blur_any_size;
use crate::image::{FloatImage, GrayImage, PadMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsharpParams {
    /// Gaussian sigma of the blur, in pixels.
    pub radius: f64,
    /// Gain applied to the edge mask.
    pub amount: f64,
}

impl UnsharpParams {
    pub fn new(radius: f64, amount: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("unsharp radius must be positive, got {radius}")));
        }
        if !(amount >= 0.0) || !amount.is_finite() {
            return Err(invalid(format!("unsharp amount must be non-negative, got {amount}")));
        }
        Ok(Self { radius, amount })
    }
}

impl Default for UnsharpParams {
    fn default() -> Self {
        Self { radius: 1.0, amount: 1.0 }
    }
}

/// `img + amount * (img - blur(img))` before rounding and clamping.
pub fn unsharp_mask_unclamped(img: &GrayImage, params: &UnsharpParams) -> FloatImage {
    let src = img.to_float();
    let blurred =
        gaussian_blur_any_size(&src, params.radius, PadMode::Reflect).expect("radius validated by UnsharpParams");
    let values = src.values().iter().zip(blurred.values()).map(|(&o, &b)| o + params.amount * (o - b)).collect();
    FloatImage::from_raw(img.width(), img.height(), values)
}

pub fn unsharp_mask(img: &GrayImage, params: &UnsharpParams) -> GrayImage {
    unsharp_mask_unclamped(img, params).to_gray()
}
