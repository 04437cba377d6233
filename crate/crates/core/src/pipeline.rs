//! Image to template: highlight removal, contrast stretch, segmentation,
//! unwrapping and encoding.

use std::path::Path;

use crate::error::Result;
use crate::gabor::gabor_encode;
use crate::image::{load_eye_image, EyeImage};
use crate::normalize::rubber_sheet_normalize;
use crate::preprocess::{normalize_contrast, remove_specular_highlights, DEFAULT_HIGHLIGHT_PERCENTILE};
use crate::segment::{load_external_mask, segment_iris_with, SegmentConfig, SegmentationResult};
use crate::template::IrisTemplate;

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub highlight_percentile: f64,
    pub segment: SegmentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            highlight_percentile: DEFAULT_HIGHLIGHT_PERCENTILE,
            segment: SegmentConfig::default(),
        }
    }
}

/// Cleaned image the segmenter and the unwrapper both see.
pub fn preprocess(img: &EyeImage, cfg: &PipelineConfig) -> EyeImage {
    normalize_contrast(&remove_specular_highlights(img, cfg.highlight_percentile))
}

/// Full pipeline with the built-in segmenter.
pub fn template_from_image(img: &EyeImage, cfg: &PipelineConfig) -> Result<(IrisTemplate, SegmentationResult)> {
    let clean = preprocess(img, cfg);
    let seg = segment_iris_with(&clean, &cfg.segment)?;
    Ok((gabor_encode(&rubber_sheet_normalize(&clean, &seg)), seg))
}

/// Pipeline with a precomputed segmentation (circles and mask).
pub fn template_with_segmentation(img: &EyeImage, seg: &SegmentationResult, cfg: &PipelineConfig) -> IrisTemplate {
    let clean = preprocess(img, cfg);
    gabor_encode(&rubber_sheet_normalize(&clean, seg))
}

/// Loads an image and, when `mask` is given, uses that sidecar instead of
/// segmenting.
pub fn template_from_path(
    path: &Path,
    mask: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<(IrisTemplate, SegmentationResult)> {
    let img = load_eye_image(path)?;
    match mask {
        Some(m) => {
            let seg = load_external_mask(m, &img)?;
            Ok((template_with_segmentation(&img, &seg, cfg), seg))
        }
        None => template_from_image(&img, cfg),
    }
}
