//! Load, preprocess, segment and describe one image.

use std::path::Path;

use crate::error::Result;
use crate::features::{extract_region_features_with, FeatureParams, FeatureVector};
use crate::imaging::{load_image, preprocess, rgb_to_hsv, HsvImage, PreprocessParams, RasterImage};
use crate::segmentation::{segment, Segmentation, SegmentationParams};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineParams {
    pub preprocess: PreprocessParams,
    pub segmentation: SegmentationParams,
    pub features: FeatureParams,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.segmentation.validate()?;
        if !self.features.patch_side.is_power_of_two() || self.features.patch_side >> self.features.levels == 0 {
            return Err(crate::Error::invalid(
                "features",
                "patch side must be a power of two of at least 2^levels",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ImageAnalysis {
    pub image: RasterImage,
    pub hsv: HsvImage,
    pub segmentation: Segmentation,
    /// One raw feature vector per significant region, in region order.
    pub features: Vec<FeatureVector>,
}

pub fn analyze_image(path: &Path, p: &PipelineParams) -> Result<ImageAnalysis> {
    let img = load_image(path)?;
    analyze_raster(&img, p)
}

pub fn analyze_raster(img: &RasterImage, p: &PipelineParams) -> Result<ImageAnalysis> {
    let image = preprocess(img, &p.preprocess);
    let segmentation = segment(&image, &p.segmentation)?;
    let hsv = rgb_to_hsv(&image);
    let features = segmentation
        .regions
        .iter()
        .map(|r| extract_region_features_with(&hsv, r, &p.features))
        .collect::<Result<_>>()?;
    Ok(ImageAnalysis {
        image,
        hsv,
        segmentation,
        features,
    })
}
