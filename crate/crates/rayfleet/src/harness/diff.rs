//! Per-pixel image comparison.

use super::image::Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffReport {
    /// Mean absolute difference over every RGB channel of every pixel.
    pub mae: f64,
    pub rmse: f64,
    pub max_abs: f64,
    /// Pixels with some channel differing by more than the threshold.
    pub over_threshold: usize,
    pub pixels: usize,
    pub threshold: f64,
}

impl DiffReport {
    pub fn over_fraction(&self) -> f64 {
        if self.pixels == 0 {
            0.0
        } else {
            self.over_threshold as f64 / self.pixels as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("image sizes differ: {a:?} vs {b:?}")]
pub struct DimensionMismatch {
    pub a: (u32, u32),
    pub b: (u32, u32),
}

pub fn compare(a: &Image, b: &Image, threshold: f64) -> Result<DiffReport, DimensionMismatch> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(DimensionMismatch { a: (a.width, a.height), b: (b.width, b.height) });
    }
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut over = 0;
    for (pa, pb) in a.rgb.iter().zip(&b.rgb) {
        let mut pixel_max = 0.0f64;
        for c in 0..3 {
            let d = (pa[c] as f64 - pb[c] as f64).abs();
            sum += d;
            sum_sq += d * d;
            pixel_max = pixel_max.max(d);
        }
        max_abs = max_abs.max(pixel_max);
        // images hold f32, so the threshold is compared at that precision:
        // one 8-bit step is then exactly 1/255 and not over it
        over += (pixel_max as f32 > threshold as f32) as usize;
    }
    let samples = (a.rgb.len() * 3).max(1) as f64;
    Ok(DiffReport {
        mae: sum / samples,
        rmse: (sum_sq / samples).sqrt(),
        max_abs,
        over_threshold: over,
        pixels: a.rgb.len(),
        threshold,
    })
}

/// `|a - b|` per channel, scaled by `gain`.
pub fn amplified_difference(a: &Image, b: &Image, gain: f32) -> Image {
    let rgb = a
        .rgb
        .iter()
        .zip(&b.rgb)
        .map(|(pa, pb)| [0, 1, 2].map(|c| (pa[c] - pb[c]).abs() * gain))
        .collect();
    Image { width: a.width, height: a.height, rgb }
}
