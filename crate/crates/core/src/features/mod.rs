//! Region descriptors: HSV color moments followed by the coarse Haar
//! approximation of each channel.

mod moments;
mod normalize;
mod wavelet;

pub use moments::{color_moments, ColorMoments};
pub use normalize::{apply_normalizer, fit_normalizer, Normalizer, NormalizerMode};
pub use wavelet::{dwt_multilevel, haar_dwt2, DetailBands, Grid, HaarBands, WaveletPyramid};

use crate::error::{Error, Result};
use crate::imaging::{sample_axis, HsvImage};
use crate::segmentation::Region;

pub const DEFAULT_PATCH_SIDE: usize = 64;
pub const DEFAULT_LEVELS: u32 = 3;
/// 9 moments + 3 channels of 8x8 approximation coefficients.
pub const DEFAULT_FEATURE_LEN: usize = 9 + 3 * 8 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    pub patch_side: usize,
    pub levels: u32,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            patch_side: DEFAULT_PATCH_SIDE,
            levels: DEFAULT_LEVELS,
        }
    }
}

impl FeatureParams {
    pub fn feature_len(&self) -> usize {
        let a = self.patch_side >> self.levels;
        9 + 3 * a * a
    }
}

fn scaled(px: [f64; 3]) -> [f64; 3] {
    [px[0] / 360.0, px[1], px[2]]
}

/// HSV pixels of the region with hue rescaled to `[0, 1]`.
pub fn region_pixels(img: &HsvImage, r: &Region) -> Vec<[f64; 3]> {
    r.pixels().map(|(row, col)| scaled(img.pixel(row, col))).collect()
}

/// Crops the region's bounding box, replaces pixels outside the mask with the
/// region's per-channel mean and resamples each channel to `side x side`.
/// Channels come back as H (scaled to `[0, 1]`), S, V.
pub fn region_to_patch(img: &HsvImage, r: &Region, side: usize) -> Result<[Grid; 3]> {
    if r.mask.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !side.is_power_of_two() {
        return Err(Error::invalid("patch_side", "must be a power of two"));
    }
    let b = r.bbox;
    let (bw, bh) = (b.width(), b.height());
    let mut mean = [0.0; 3];
    let mut inside = vec![false; bw * bh];
    for (row, col) in r.pixels() {
        inside[(row - b.top) * bw + (col - b.left)] = true;
        let px = scaled(img.pixel(row, col));
        for k in 0..3 {
            mean[k] += px[k];
        }
    }
    mean = mean.map(|s| s / r.area as f64);

    let crop: Vec<[f64; 3]> = (0..bw * bh)
        .map(|i| {
            if inside[i] {
                scaled(img.pixel(b.top + i / bw, b.left + i % bw))
            } else {
                mean
            }
        })
        .collect();

    let mut out: [Vec<f64>; 3] = Default::default();
    for ch in &mut out {
        ch.reserve(side * side);
    }
    let (sx, sy) = (bw as f64 / side as f64, bh as f64 / side as f64);
    for row in 0..side {
        let (y0, y1, fy) = sample_axis(row, sy, bh);
        for col in 0..side {
            let (x0, x1, fx) = sample_axis(col, sx, bw);
            for (k, ch) in out.iter_mut().enumerate() {
                let top = crop[y0 * bw + x0][k] + (crop[y0 * bw + x1][k] - crop[y0 * bw + x0][k]) * fx;
                let bot = crop[y1 * bw + x0][k] + (crop[y1 * bw + x1][k] - crop[y1 * bw + x0][k]) * fx;
                ch.push(top + (bot - top) * fy);
            }
        }
    }
    let [h, s, v] = out;
    Ok([Grid::new(side, h)?, Grid::new(side, s)?, Grid::new(side, v)?])
}

pub fn extract_region_features(img: &HsvImage, r: &Region) -> Result<FeatureVector> {
    extract_region_features_with(img, r, &FeatureParams::default())
}

/// `[moments(H), moments(S), moments(V), A_L(H), A_L(S), A_L(V)]`, each
/// approximation grid flattened row-major.
pub fn extract_region_features_with(img: &HsvImage, r: &Region, p: &FeatureParams) -> Result<FeatureVector> {
    let pixels = region_pixels(img, r);
    let moments = color_moments(&pixels)?;
    let mut values = Vec::with_capacity(p.feature_len());
    values.extend(moments.to_array());
    for channel in region_to_patch(img, r, p.patch_side)? {
        let pyramid = dwt_multilevel(&channel, p.levels)?;
        values.extend(pyramid.approx.into_data());
    }
    Ok(FeatureVector(values))
}
