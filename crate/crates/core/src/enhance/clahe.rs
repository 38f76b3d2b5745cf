//! Per-pixel sliding-window contrast limited adaptive histogram equalization.
//!
//! Every output pixel is equalized against the clipped histogram of the
//! `window`x`window` region centred on it, over an image reflect-padded by
//! `(window - 1) / 2`. Clipping cuts each bin at `clip_limit` and spreads the
//! cut counts evenly over all 256 bins, the remainder going one each to the
//! lowest bins, so totals are conserved exactly.
//!
//! [`clahe`] rebuilds every window histogram from scratch. [`clahe_fast`]
//! produces identical output from incrementally maintained histograms, and
//! answers a single clipping pass in closed form from the clipped counts.

use crate::error::{invalid, Result};
use crate::exposure::{scale_to_255, Histogram};
use crate::image::{border_index, GrayImage, PadMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClaheParams {
    pub window: usize,
    pub clip_limit: u64,
    pub iterations: usize,
}

impl ClaheParams {
    pub fn new(window: usize, clip_limit: u64, iterations: usize) -> Result<Self> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(invalid(format!("CLAHE window must be odd and >= 3, got {window}")));
        }
        if clip_limit < 1 {
            return Err(invalid("CLAHE clip limit must be >= 1"));
        }
        if iterations < 1 {
            return Err(invalid("CLAHE iterations must be >= 1"));
        }
        Ok(Self { window, clip_limit, iterations })
    }

    /// Window with the default clip limit `max(1, round(0.01 * window^2))` and one iteration.
    pub fn with_window(window: usize) -> Result<Self> {
        let clip = ((0.01 * (window * window) as f64).round() as u64).max(1);
        Self::new(window, clip, 1)
    }

    fn margin(&self) -> usize {
        (self.window - 1) / 2
    }

    fn area(&self) -> u64 {
        (self.window * self.window) as u64
    }
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self::with_window(15).expect("valid default window")
    }
}

/// Clips every bin at `clip_limit` and redistributes the excess, `iterations` times.
pub fn clip_histogram(hist: &Histogram, clip_limit: u64, iterations: usize) -> Histogram {
    let mut out = hist.clone();
    for _ in 0..iterations {
        if clip_pass(out.bins_mut(), clip_limit) == 0 {
            break;
        }
    }
    out
}

/// One clip-and-redistribute pass. Returns the excess that was moved.
fn clip_pass(bins: &mut [u64; 256], clip_limit: u64) -> u64 {
    let mut excess = 0;
    for b in bins.iter_mut() {
        if *b > clip_limit {
            excess += *b - clip_limit;
            *b = clip_limit;
        }
    }
    if excess > 0 {
        let share = excess / 256;
        let rest = (excess % 256) as usize;
        for (i, b) in bins.iter_mut().enumerate() {
            *b += share + u64::from(i < rest);
        }
    }
    excess
}

fn check_window(img: &GrayImage, params: &ClaheParams) -> Result<()> {
    let (w, h) = img.dimensions();
    if params.window >= 2 * w.min(h) {
        return Err(invalid(format!(
            "CLAHE window {} too large for a {}x{} image (must be < {})",
            params.window,
            w,
            h,
            2 * w.min(h)
        )));
    }
    Ok(())
}

/// Reflect-padded copy as a flat byte buffer.
fn reflect_pad(img: &GrayImage, margin: usize) -> (Vec<u8>, usize) {
    let (w, h) = img.dimensions();
    let pw = w + 2 * margin;
    let ph = h + 2 * margin;
    let m = margin as isize;
    let mut buf = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let sy = border_index(py as isize - m, h, PadMode::Reflect).expect("reflect never drops");
        let row = img.row(sy);
        for px in 0..pw {
            let sx = border_index(px as isize - m, w, PadMode::Reflect).expect("reflect never drops");
            buf.push(row[sx]);
        }
    }
    (buf, pw)
}

/// Naive CLAHE: every window histogram is rebuilt from the padded image.
pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    check_window(img, params)?;
    let (w, h) = img.dimensions();
    let win = params.window;
    let (padded, pw) = reflect_pad(img, params.margin());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut bins = [0u64; 256];
            for wy in y..y + win {
                for &v in &padded[wy * pw + x..wy * pw + x + win] {
                    bins[v as usize] += 1;
                }
            }
            let clipped = clip_histogram(&Histogram::from_bins(bins), params.clip_limit, params.iterations);
            let centre = img.get(x, y);
            out.push(scale_to_255(clipped.cumulative(centre), params.area()));
        }
    }
    GrayImage::new(w, h, out)
}

/// Window histogram that keeps, for one tracked value `v`, the cumulative of
/// the clipped counts `min(count, limit)` over bins `0..=v`, together with the
/// total excess above the limit. Count updates adjust both in O(1) without
/// branching; retargeting `v` walks only the bins between old and new value,
/// which is short because neighbouring pixels tend to be close in value.
struct SlidingHistogram {
    bins: [u32; 256],
    limit: u32,
    tracked: u8,
    kept_upto: u64,
    excess: u64,
}

impl SlidingHistogram {
    fn new(limit: u64) -> Self {
        let limit = u32::try_from(limit).unwrap_or(u32::MAX);
        Self { bins: [0; 256], limit, tracked: 0, kept_upto: 0, excess: 0 }
    }

    #[inline]
    fn add(&mut self, v: u8) {
        let b = &mut self.bins[v as usize];
        let kept = u64::from(*b < self.limit);
        *b += 1;
        self.excess += 1 - kept;
        self.kept_upto += kept & u64::from(v <= self.tracked);
    }

    #[inline]
    fn remove(&mut self, v: u8) {
        let b = &mut self.bins[v as usize];
        *b -= 1;
        let kept = u64::from(*b < self.limit);
        self.excess -= 1 - kept;
        self.kept_upto -= kept & u64::from(v <= self.tracked);
    }

    #[inline]
    fn swap(&mut self, out: u8, incoming: u8) {
        self.remove(out);
        self.add(incoming);
    }

    fn kept(&self, range: std::ops::RangeInclusive<usize>) -> u64 {
        self.bins[range].iter().map(|&b| u64::from(b.min(self.limit))).sum()
    }

    fn retarget(&mut self, v: u8) {
        let (old, new) = (self.tracked as usize, v as usize);
        if new > old {
            self.kept_upto += self.kept(old + 1..=new);
        } else if new < old {
            self.kept_upto -= self.kept(new + 1..=old);
        }
        self.tracked = v;
    }

    fn clipped_cumulative(&mut self, v: u8, iterations: usize) -> u64 {
        self.retarget(v);
        clipped_cumulative(self.kept_upto, self.excess, v, iterations, self.limit.into(), || self.bins.map(u64::from))
    }
}

/// Cumulative count up to `v` after `iterations` clipping passes, given the
/// clipped counts summed over `0..=v` and the excess above `limit`. One pass
/// has a closed form; further passes are replayed on the full histogram.
fn clipped_cumulative(
    kept_upto: u64,
    excess: u64,
    v: u8,
    iterations: usize,
    limit: u64,
    bins: impl FnOnce() -> [u64; 256],
) -> u64 {
    if excess == 0 {
        return kept_upto;
    }
    let upto = v as u64 + 1;
    if iterations == 1 {
        return kept_upto + excess / 256 * upto + (excess % 256).min(upto);
    }
    let mut bins = bins();
    for _ in 0..iterations {
        if clip_pass(&mut bins, limit) == 0 {
            break;
        }
    }
    bins[..upto as usize].iter().sum()
}

/// Count-to-level table, which skips a 64-bit division per pixel.
fn level_table(area: u64) -> Vec<u8> {
    (0..=area).map(|c| scale_to_255(c, area)).collect()
}

const BIN_INDEX: [u16; 256] = {
    let mut idx = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        idx[i] = i as u16;
        i += 1;
    }
    idx
};

/// Perreault-Hebert scheme: one `u16` histogram per padded column covering
/// the current band of `window` rows, so moving the window one pixel right is
/// a 256-bin add and subtract regardless of window size. Needs `window^2` to
/// fit in `u16`.
fn column_histograms(img: &GrayImage, params: &ClaheParams) -> Vec<u8> {
    let (w, h) = img.dimensions();
    let win = params.window;
    let area = params.area();
    let limit = params.clip_limit.min(area) as u16;
    let levels = level_table(area);
    let (padded, pw) = reflect_pad(img, params.margin());

    let mut columns = vec![[0u16; 256]; pw];
    for row in padded.chunks_exact(pw).take(win) {
        for (col, &v) in columns.iter_mut().zip(row) {
            col[v as usize] += 1;
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        if y > 0 {
            let gone = &padded[(y - 1) * pw..y * pw];
            let new = &padded[(y + win - 1) * pw..(y + win) * pw];
            for ((col, &o), &i) in columns.iter_mut().zip(gone).zip(new) {
                col[o as usize] -= 1;
                col[i as usize] += 1;
            }
        }
        let mut hist = [0u16; 256];
        for col in &columns[..win] {
            for (b, &c) in hist.iter_mut().zip(col) {
                *b += c;
            }
        }
        for x in 0..w {
            let v = img.get(x, y);
            // Fixed-length, branch-free 16-bit passes so the loops vectorize.
            // No sum can wrap: the clipped counts add up to at most `area`.
            let mut kept_low = 0u16;
            let mut kept = 0u16;
            let mut step = |b: &mut u16, bin: u16| {
                let clipped = *b - b.saturating_sub(limit);
                kept_low = kept_low.wrapping_add(clipped & 0u16.wrapping_sub(u16::from(bin <= u16::from(v))));
                kept = kept.wrapping_add(clipped);
            };
            if x > 0 {
                let (gone, new) = (&columns[x - 1], &columns[x + win - 1]);
                for (((b, &o), &i), &bin) in hist.iter_mut().zip(gone).zip(new).zip(&BIN_INDEX) {
                    *b = b.wrapping_add(i).wrapping_sub(o);
                    step(b, bin);
                }
            } else {
                for (b, &bin) in hist.iter_mut().zip(&BIN_INDEX) {
                    step(b, bin);
                }
            }
            let excess = area - u64::from(kept);
            let c =
                clipped_cumulative(kept_low.into(), excess, v, params.iterations, limit.into(), || hist.map(u64::from));
            out[y * w + x] = levels[c as usize];
        }
    }
    out
}

/// Huang-style sliding histogram in serpentine order: O(window) updates per
/// pixel, with no limit on the window area.
fn sliding(img: &GrayImage, params: &ClaheParams) -> Vec<u8> {
    let (w, h) = img.dimensions();
    let win = params.window;
    let area = params.area();
    let (padded, pw) = reflect_pad(img, params.margin());
    let ph = padded.len() / pw;
    // Column-major copy so vertical window edges are contiguous slices.
    let mut columns = vec![0u8; padded.len()];
    for (py, row) in padded.chunks_exact(pw).enumerate() {
        for (px, &v) in row.iter().enumerate() {
            columns[px * ph + py] = v;
        }
    }
    let row_seg = |x: usize, y: usize| &padded[y * pw + x..y * pw + x + win];
    let col_seg = |x: usize, y: usize| &columns[x * ph + y..x * ph + y + win];

    let mut hist = SlidingHistogram::new(params.clip_limit);
    for wy in 0..win {
        for &v in row_seg(0, wy) {
            hist.add(v);
        }
    }

    let mut out = vec![0u8; w * h];
    for y in 0..h {
        if y > 0 {
            // Slide down by one row at the current horizontal position.
            let x0 = if y % 2 == 1 { w - 1 } else { 0 };
            for (&o, &i) in row_seg(x0, y - 1).iter().zip(row_seg(x0, y + win - 1)) {
                hist.swap(o, i);
            }
        }
        let left_to_right = y % 2 == 0;
        for step in 0..w {
            let x = if left_to_right { step } else { w - 1 - step };
            if step > 0 {
                let (gone, new) = if left_to_right { (x - 1, x + win - 1) } else { (x + win, x) };
                for (&o, &i) in col_seg(gone, y).iter().zip(col_seg(new, y)) {
                    hist.swap(o, i);
                }
            }
            let centre = img.get(x, y);
            out[y * w + x] = scale_to_255(hist.clipped_cumulative(centre, params.iterations), area);
        }
    }
    out
}

/// Same output as [`clahe`] with per-pixel cost independent of the window
/// (sublinear in it for windows too large for `u16` column counts).
pub fn clahe_fast(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    check_window(img, params)?;
    let out = if params.area() <= u64::from(u16::MAX) { column_histograms(img, params) } else { sliding(img, params) };
    GrayImage::new(img.width(), img.height(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::histogram;
    use proptest::prelude::*;

    /// Plain sliding-window AHE, written independently of the CLAHE code path.
    fn ahe_oracle(img: &GrayImage, window: usize) -> GrayImage {
        let r = (window / 2) as isize;
        let (w, h) = img.dimensions();
        GrayImage::from_fn(w, h, |x, y| {
            let c = img.get(x, y);
            let mut le = 0u64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = reflect(x as isize + dx, w);
                    let sy = reflect(y as isize + dy, h);
                    if img.get(sx, sy) <= c {
                        le += 1;
                    }
                }
            }
            let n = (window * window) as f64;
            (255.0 * le as f64 / n).round() as u8
        })
        .unwrap()
    }

    fn reflect(i: isize, n: usize) -> usize {
        let n = n as isize;
        let j = if i < 0 {
            -i
        } else if i >= n {
            2 * (n - 1) - i
        } else {
            i
        };
        j as usize
    }

    #[test]
    fn params_validation() {
        assert!(ClaheParams::new(4, 10, 1).is_err());
        assert!(ClaheParams::new(1, 10, 1).is_err());
        assert!(ClaheParams::new(3, 0, 1).is_err());
        assert!(ClaheParams::new(3, 1, 0).is_err());
        let d = ClaheParams::default();
        assert_eq!((d.window, d.clip_limit, d.iterations), (15, 2, 1));
        assert_eq!(ClaheParams::with_window(33).unwrap().clip_limit, 11);
    }

    #[test]
    fn clip_without_excess_is_identity() {
        let mut bins = [0u64; 256];
        bins[3] = 5;
        bins[200] = 7;
        let h = Histogram::from_bins(bins);
        assert_eq!(clip_histogram(&h, 7, 3), h);
    }

    #[test]
    fn clip_single_spike() {
        let mut bins = [0u64; 256];
        bins[100] = 81;
        let out = clip_histogram(&Histogram::from_bins(bins), 40, 1);
        assert_eq!(out.bins()[100], 40);
        for i in 0..256 {
            let expected = match i {
                0..=40 => 1,
                100 => 40,
                _ => 0,
            };
            assert_eq!(out.bins()[i], expected, "bin {i}");
        }
        assert_eq!(out.total(), 81);
    }

    #[test]
    fn window_too_large() {
        let img = GrayImage::filled(5, 8, 1).unwrap();
        let p = ClaheParams::new(11, 5, 1).unwrap();
        assert!(clahe(&img, &p).is_err());
        assert!(clahe_fast(&img, &p).is_err());
        assert!(clahe(&img, &ClaheParams::new(9, 5, 1).unwrap()).is_ok());
    }

    #[test]
    fn constant_image() {
        let img = GrayImage::filled(20, 16, 128).unwrap();
        let p = ClaheParams::new(9, 40, 1).unwrap();
        let slow = clahe(&img, &p).unwrap();
        // 81 counts at 128 clip to 40, the 41 cut counts land on bins 0..=40:
        // cdf(128) = (41 + 40) / 81.
        assert!(slow.pixels().iter().all(|&v| v == 255));
        assert_eq!(clahe_fast(&img, &p).unwrap(), slow);

        let p = ClaheParams::new(9, 10, 2).unwrap();
        let slow = clahe(&img, &p).unwrap();
        let first = slow.get(0, 0);
        assert!(slow.pixels().iter().all(|&v| v == first));
        assert_eq!(clahe_fast(&img, &p).unwrap(), slow);
    }

    #[test]
    fn checkerboard_matches_ahe() {
        let img = GrayImage::from_fn(12, 10, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 }).unwrap();
        let p = ClaheParams::new(3, 9, 1).unwrap();
        let expected = ahe_oracle(&img, 3);
        assert_eq!(clahe(&img, &p).unwrap(), expected);
        assert_eq!(clahe_fast(&img, &p).unwrap(), expected);
    }

    fn image_and_params() -> impl Strategy<Value = (GrayImage, ClaheParams)> {
        (4usize..20, 4usize..20, 1usize..5, 1u64..30, 1usize..4, 0u8..3).prop_flat_map(|(w, h, r, clip, it, levels)| {
            let r = r.min(w.min(h) - 1);
            let max = [255u8, 15, 3][levels as usize];
            prop::collection::vec(0..=max, w * h)
                .prop_map(move |px| (GrayImage::new(w, h, px).unwrap(), ClaheParams::new(2 * r + 1, clip, it).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn fast_equals_naive((img, p) in image_and_params()) {
            prop_assert_eq!(clahe_fast(&img, &p).unwrap(), clahe(&img, &p).unwrap());
        }

        // The large-window fallback, forced onto small windows.
        #[test]
        fn sliding_equals_naive((img, p) in image_and_params()) {
            prop_assert_eq!(sliding(&img, &p), clahe(&img, &p).unwrap().pixels().to_vec());
        }

        #[test]
        fn no_clipping_is_ahe((img, p) in image_and_params()) {
            let p = ClaheParams::new(p.window, (p.window * p.window) as u64, p.iterations).unwrap();
            prop_assert_eq!(clahe(&img, &p).unwrap(), ahe_oracle(&img, p.window));
        }

        #[test]
        fn clipping_conserves_and_bounds(
            counts in prop::collection::vec(0u64..500, 256),
            clip in 1u64..100,
            iterations in 1usize..6,
        ) {
            let mut bins = [0u64; 256];
            bins.copy_from_slice(&counts);
            let h = Histogram::from_bins(bins);
            let mut cur = h.clone();
            let mut prev_excess = u64::MAX;
            for _ in 0..iterations {
                let excess: u64 = cur.bins().iter().map(|&b| b.saturating_sub(clip)).sum();
                prop_assert!(excess <= prev_excess);
                prev_excess = excess;
                let next = clip_histogram(&cur, clip, 1);
                prop_assert_eq!(next.bins().iter().sum::<u64>(), h.total());
                let bound = clip + excess.div_ceil(256);
                prop_assert!(next.bins().iter().all(|&b| b <= bound.max(clip)));
                cur = next;
            }
            prop_assert_eq!(clip_histogram(&h, clip, iterations), cur);
        }

        #[test]
        fn output_depends_only_on_window(
            (img, p) in image_and_params(),
            noise in any::<u8>(),
        ) {
            // Change a pixel far outside the window of (0, 0) in padded space.
            let (w, h) = img.dimensions();
            let m = p.window / 2;
            prop_assume!(w > 2 * m + 1);
            let mut px = img.clone().into_pixels();
            px[w - 1] = noise;
            let other = GrayImage::new(w, h, px).unwrap();
            // Reflection maps column w-1 into the window of x=0 only if m >= w-1.
            let a = clahe(&img, &p).unwrap();
            let b = clahe(&other, &p).unwrap();
            prop_assert_eq!(a.get(0, 0), b.get(0, 0));
        }
    }

    #[test]
    fn histogram_of_window_matches_direct() {
        let img = GrayImage::from_fn(9, 9, |x, y| (x * 31 + y * 17) as u8).unwrap();
        let direct = histogram(&img);
        let mut s = SlidingHistogram::new(u64::MAX);
        for &v in img.pixels() {
            s.add(v);
        }
        assert_eq!(s.bins.map(u64::from), *direct.bins());
        assert_eq!((s.excess, s.kept_upto), (0, direct.bins()[0]));
    }
}
