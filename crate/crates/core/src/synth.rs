//! Deterministic radiograph-like phantoms.
//!
//! Every phantom is a pure function of its [`PhantomSpec`]. Intensities are
//! laid out so that roughly 35-45% of an unbiased phantom sits in the lower
//! half of the gray scale, which keeps unbiased phantoms "normal" and lets
//! `exposure_bias = -1 / +1` produce clearly under- / over-exposed copies.

use crate::error::{invalid, Result};
use crate::image::{quantize, GrayImage};
use crate::rng::{seeded, Rng, SeededRng, StandardNormal};

pub const MIN_PHANTOM_SIZE: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    /// Soft-edged body outline with bone-like and air-like inclusions.
    Ellipses,
    /// Groups of 0/255 line pairs with shrinking spacing.
    Bars,
    /// Smooth horizontal ramp.
    Gradient,
    /// Ramp background, body outline, inclusions and a bar inset.
    Mixed,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 4] =
        [PhantomKind::Ellipses, PhantomKind::Bars, PhantomKind::Gradient, PhantomKind::Mixed];

    fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub kind: PhantomKind,
    /// Number of primitives (inclusions or bar groups).
    pub count: usize,
    pub noise_sigma: f64,
    /// Global brightness shift in `[-1, 1]`, applied as `v + bias * 128`.
    pub exposure_bias: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            seed: 0,
            kind: PhantomKind::Ellipses,
            count: 5,
            noise_sigma: 3.0,
            exposure_bias: 0.0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_PHANTOM_SIZE || self.height < MIN_PHANTOM_SIZE {
            return Err(invalid(format!(
                "phantoms must be at least {MIN_PHANTOM_SIZE}x{MIN_PHANTOM_SIZE}, got {}x{}",
                self.width, self.height
            )));
        }
        if self.count == 0 {
            return Err(invalid("phantom primitive count must be positive"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(invalid("noise sigma must be non-negative"));
        }
        if !(-1.0..=1.0).contains(&self.exposure_bias) {
            return Err(invalid(format!("exposure bias must lie in [-1, 1], got {}", self.exposure_bias)));
        }
        Ok(())
    }
}

struct Canvas {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Canvas {
    fn new(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                v.push(f(x, y));
            }
        }
        Self { w, h, v }
    }

    /// Blends `value` into a soft-edged ellipse.
    fn ellipse(&mut self, cx: f64, cy: f64, rx: f64, ry: f64, angle: f64, value: f64) {
        let (s, c) = angle.sin_cos();
        let edge = 1.5 / rx.min(ry);
        let reach = rx.max(ry) * (1.0 + edge) + 1.0;
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let y1 = ((cy + reach).ceil() as usize).min(self.h - 1);
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil() as usize).min(self.w - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let u = (c * dx + s * dy) / rx;
                let t = (-s * dx + c * dy) / ry;
                let r = (u * u + t * t).sqrt();
                let alpha = 1.0 - smoothstep(1.0 - edge, 1.0 + edge, r);
                if alpha > 0.0 {
                    let p = &mut self.v[y * self.w + x];
                    *p = *p * (1.0 - alpha) + value * alpha;
                }
            }
        }
    }

    /// Line pairs alternating 0/255 inside the rectangle, with stripes of
    /// `half_period` pixels, vertical stripes when `vertical`.
    fn bars(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, half_period: usize, vertical: bool) {
        for y in y0..y1 {
            for x in x0..x1 {
                let k = if vertical { x - x0 } else { y - y0 };
                self.v[y * self.w + x] = if (k / half_period).is_multiple_of(2) { 0.0 } else { 255.0 };
            }
        }
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn body_and_inclusions(c: &mut Canvas, rng: &mut SeededRng, count: usize, body_level: f64) {
    let (w, h) = (c.w as f64, c.h as f64);
    let cx = w * rng.random_range(0.47..0.53);
    let cy = h * rng.random_range(0.47..0.53);
    let rx = w * rng.random_range(0.42..0.46);
    let ry = h * rng.random_range(0.41..0.45);
    c.ellipse(cx, cy, rx, ry, rng.random_range(-0.15..0.15), body_level);
    for _ in 0..count {
        // Bones are bright, air pockets darker than tissue.
        let bright = rng.random::<f64>() < 0.75;
        let level = if bright { rng.random_range(185.0..240.0) } else { rng.random_range(95.0..120.0) };
        let a = rng.random_range(0.04..0.14) * w;
        let b = rng.random_range(0.03..0.10) * h;
        let px = cx + rng.random_range(-0.55..0.55) * (rx - a);
        let py = cy + rng.random_range(-0.55..0.55) * (ry - b);
        c.ellipse(px, py, a, b, rng.random_range(0.0..std::f64::consts::PI), level);
    }
}

fn bar_groups(c: &mut Canvas, rng: &mut SeededRng, count: usize, x0: usize, y0: usize, x1: usize, y1: usize) {
    let vertical = rng.random::<f64>() < 0.5;
    let span = if vertical { y1 - y0 } else { x1 - x0 };
    let groups = count.min(span / 2).max(1);
    for g in 0..groups {
        // Groups tile the long axis; stripes narrow from 6 px to 3 px, which
        // still survives a 2x decimation.
        let a = span * g / groups;
        let b = span * (g + 1) / groups;
        let half = 6 - g * 3 / groups;
        if vertical {
            c.bars(x0, y0 + a, x1, y0 + b, half, true);
        } else {
            c.bars(x0 + a, y0, x0 + b, y1, half, false);
        }
    }
}

fn render(spec: &PhantomSpec, rng: &mut SeededRng) -> Canvas {
    let (w, h) = (spec.width, spec.height);
    match spec.kind {
        PhantomKind::Gradient => {
            let lo = 30 + rng.random_range(0..21) as u32;
            let hi = 220 + rng.random_range(0..31) as u32;
            let span = (hi - lo) as f64;
            Canvas::new(w, h, |x, _| (lo as f64 + span * x as f64 / (w - 1) as f64).round())
        }
        PhantomKind::Ellipses => {
            let base = rng.random_range(20.0..45.0);
            let tilt = rng.random_range(0.0..25.0);
            let mut c = Canvas::new(w, h, |_, y| base + tilt * y as f64 / h as f64);
            let body = rng.random_range(140.0..165.0);
            body_and_inclusions(&mut c, rng, spec.count, body);
            c
        }
        PhantomKind::Bars => {
            let bg = rng.random_range(160.0..190.0);
            let mut c = Canvas::new(w, h, |_, _| bg);
            // The bar field covers about 70% of the image area.
            let mx = w * 8 / 100;
            let my = h * 8 / 100;
            bar_groups(&mut c, rng, spec.count, mx, my, w - mx, h - my);
            c
        }
        PhantomKind::Mixed => {
            let lo = rng.random_range(25.0..45.0);
            let hi = rng.random_range(70.0..95.0);
            let mut c = Canvas::new(w, h, |x, y| lo + (hi - lo) * (x + y) as f64 / (w + h - 2) as f64);
            let body = rng.random_range(145.0..170.0);
            body_and_inclusions(&mut c, rng, spec.count, body);
            let iw = w / 4;
            let ih = h / 5;
            let ix = w / 2 - iw / 2 + rng.random_range(0..w / 10);
            let iy = h / 2 - ih / 2 + rng.random_range(0..h / 10);
            bar_groups(&mut c, rng, 3, ix, iy, (ix + iw).min(w), (iy + ih).min(h));
            c
        }
    }
}

pub fn generate(spec: &PhantomSpec) -> Result<GrayImage> {
    spec.validate()?;
    let mut rng = seeded(spec.seed ^ ((spec.kind.index() as u64) << 56));
    let mut canvas = render(spec, &mut rng);
    if spec.noise_sigma > 0.0 {
        let mut noise_rng = seeded(spec.seed.wrapping_add(0xA5A5_5A5A_0000_0001));
        for v in canvas.v.iter_mut() {
            *v += spec.noise_sigma * noise_rng.sample::<f64, _>(StandardNormal);
        }
    }
    let shift = spec.exposure_bias * 128.0;
    let pixels = canvas.v.iter().map(|&v| quantize(quantize(v) as f64 + shift)).collect();
    GrayImage::new(spec.width, spec.height, pixels)
}

/// `n` phantoms with seeds `base.seed ..` and kinds cycling from `base.kind`.
pub fn make_corpus(n: usize, base: &PhantomSpec) -> Result<Vec<GrayImage>> {
    if n == 0 {
        return Err(invalid("corpus size must be positive"));
    }
    corpus_specs(n, base).iter().map(generate).collect()
}

pub fn corpus_specs(n: usize, base: &PhantomSpec) -> Vec<PhantomSpec> {
    let k0 = base.kind.index();
    (0..n)
        .map(|i| PhantomSpec {
            seed: base.seed.wrapping_add(i as u64),
            kind: PhantomKind::ALL[(k0 + i) % PhantomKind::ALL.len()],
            ..*base
        })
        .collect()
}
