//! Scale-invariant feature extraction: Gaussian/DoG pyramid, extrema
//! detection and refinement, orientation assignment and 128-d descriptors.

mod descriptor;
mod detect;
mod orientation;
mod scale_space;

pub use descriptor::{compute_descriptors, Descriptor, DESCRIPTOR_CLAMP, DESCRIPTOR_LEN};
pub use detect::{detect_extrema, passes_edge_test, refine_keypoints, Candidate};
pub use orientation::{assign_orientations, histogram_peaks, orientation_histogram, ORIENTATION_BINS};
pub use scale_space::{build_scale_space, compute_dog, DogImage, DogSpace, Octave, ScaleSpace, MIN_OCTAVE_SIDE};

use std::cmp::Ordering;

use crate::error::Result;
use crate::image::GrayImage;

/// Extraction parameters. Defaults follow Lowe's original detector.
#[derive(Clone, Debug, PartialEq)]
pub struct SiftParams {
    pub scales_per_octave: usize,
    pub base_sigma: f32,
    /// Blur the input is assumed to already carry.
    pub assumed_blur: f32,
    /// `None` selects `floor(log2(min(w, h))) − 3`.
    pub octave_count: Option<usize>,
    /// Minimum interpolated `|D|` on `[0, 1]` intensities.
    pub contrast_threshold: f32,
    pub edge_ratio: f32,
    pub orientation_peak_ratio: f32,
    /// Double the input before building the pyramid.
    pub upsample: bool,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            scales_per_octave: 3,
            base_sigma: 1.6,
            assumed_blur: 0.5,
            octave_count: None,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            orientation_peak_ratio: 0.8,
            upsample: false,
        }
    }
}

/// Located, scaled and oriented interest point in input-image pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Absolute scale in input pixels.
    pub sigma: f64,
    /// Radians in `[0, 2π)`.
    pub orientation: f64,
    pub octave: usize,
    pub scale_index: usize,
    /// Interpolated `|D|` at the extremum.
    pub contrast: f64,
}

impl Keypoint {
    /// Canonical order: octave, scale index, y, x, orientation.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.octave
            .cmp(&other.octave)
            .then(self.scale_index.cmp(&other.scale_index))
            .then(self.y.total_cmp(&other.y))
            .then(self.x.total_cmp(&other.x))
            .then(self.orientation.total_cmp(&other.orientation))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: Descriptor,
}

/// Full extraction pipeline, returning features in canonical order.
///
/// Images too small for a single octave yield a dimension error.
pub fn extract_features(img: &GrayImage, params: &SiftParams) -> Result<Vec<Feature>> {
    let ss = build_scale_space(img, params)?;
    let dog = compute_dog(&ss);
    let cands = detect_extrema(&dog, params.contrast_threshold);
    let kps = refine_keypoints(&cands, &dog, &ss, params.contrast_threshold, params.edge_ratio);
    let oriented = assign_orientations(&kps, &ss, f64::from(params.orientation_peak_ratio));
    let mut features: Vec<Feature> = compute_descriptors(&oriented, &ss)
        .into_iter()
        .filter(|(kp, _)| kp.x >= 0.0 && kp.y >= 0.0 && kp.x < img.width() as f64 && kp.y < img.height() as f64)
        .map(|(keypoint, descriptor)| Feature {
            keypoint,
            descriptor,
        })
        .collect();
    features.sort_by(|a, b| a.keypoint.canonical_cmp(&b.keypoint));
    Ok(features)
}
