//! Plate-level recognition: preprocessing, feature extraction, matching
//! against every enrolled template, and homography verification.

use std::time::Instant;

use crate::detector::{detect_candidates, DetectorParams, PlateCandidate};
use crate::error::{Error, Result};
use crate::homography::{project_quad, quad_area, quad_is_convex, robust_fit, Correspondence, Quad, RobustParams};
use crate::image::{to_grayscale, GrayImage, RgbImage};
use crate::matching::{match_descriptors, DEFAULT_RATIO};
use crate::registry::Registry;
use crate::sift::{extract_features, Descriptor, SiftParams};

pub const MIN_PREPROCESSED_SIDE: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessParams {
    /// Fraction of each dimension removed from every side.
    pub margin: f64,
    pub low_percentile: f64,
    pub high_percentile: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            margin: 0.04,
            low_percentile: 2.0,
            high_percentile: 98.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineParams {
    pub sift: SiftParams,
    pub ratio: f64,
    pub robust: RobustParams,
    pub preprocess: PreprocessParams,
    /// Accepted projected-quad area as a fraction of the plate area.
    pub quad_area_range: (f64, f64),
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            sift: SiftParams::default(),
            ratio: DEFAULT_RATIO,
            robust: RobustParams::default(),
            preprocess: PreprocessParams::default(),
            quad_area_range: (0.05, 2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    Special {
        label: String,
        /// Template corners in input-plate pixels.
        quad: Quad,
        inlier_count: usize,
        reproj_rmse: f64,
    },
    Normal,
}

impl Classification {
    pub fn label(&self) -> Option<&str> {
        match self {
            Classification::Special { label, .. } => Some(label),
            Classification::Normal => None,
        }
    }

    pub fn is_special(&self) -> bool {
        matches!(self, Classification::Special { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateDiagnostic {
    pub label: String,
    pub raw_matches: usize,
    /// Zero when the robust fit was rejected.
    pub inliers: usize,
    pub reproj_rmse: Option<f64>,
}

/// Wall-clock milliseconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTiming {
    pub preprocess_ms: f64,
    pub extract_ms: f64,
    pub match_ms: f64,
    pub verify_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecognitionResult {
    pub classification: Classification,
    pub diagnostics: Vec<TemplateDiagnostic>,
    pub timing: StageTiming,
}

fn percentile(sorted: &[f32], p: f64) -> f32 {
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = (pos - i as f64) as f32;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// Border crop followed by a linear percentile stretch. Returns the
/// processed image and the crop origin in input pixels.
pub fn preprocess_with_origin(img: &GrayImage, params: &PreprocessParams) -> Result<(GrayImage, (usize, usize))> {
    if !(0.0..0.5).contains(&params.margin) {
        return Err(Error::Parameter(format!("margin {} outside [0, 0.5)", params.margin)));
    }
    if !(params.low_percentile < params.high_percentile) {
        return Err(Error::Parameter("low percentile must be below high percentile".into()));
    }
    let (w, h) = img.dimensions();
    // output side is floor(n·(1 − 2·margin)), centred
    let keep = |n: usize| ((n as f64 * (1.0 - 2.0 * params.margin)) + 1e-9).floor() as usize;
    let (cw, ch) = (keep(w), keep(h));
    let (mx, my) = ((w - cw) / 2, (h - ch) / 2);
    if cw < MIN_PREPROCESSED_SIDE || ch < MIN_PREPROCESSED_SIDE {
        return Err(Error::Dimension(format!(
            "{w}x{h} plate leaves {cw}x{ch} after border crop, need {MIN_PREPROCESSED_SIDE}x{MIN_PREPROCESSED_SIDE}"
        )));
    }
    let cropped = img.crop(mx, my, mx + cw - 1, my + ch - 1)?;
    let mut sorted = cropped.data().to_vec();
    sorted.sort_by(f32::total_cmp);
    let lo = percentile(&sorted, params.low_percentile);
    let hi = percentile(&sorted, params.high_percentile);
    let out = if hi > lo {
        let scale = 1.0 / (hi - lo);
        cropped.map(|v| ((v - lo) * scale).clamp(0.0, 1.0))
    } else {
        cropped
    };
    Ok((out, (mx, my)))
}

pub fn preprocess_plate(img: &GrayImage, params: &PreprocessParams) -> Result<GrayImage> {
    preprocess_with_origin(img, params).map(|(g, _)| g)
}

pub fn preprocess_rgb_plate(img: &RgbImage, params: &PreprocessParams) -> Result<GrayImage> {
    preprocess_plate(&to_grayscale(img)?, params)
}

struct Verified {
    label: String,
    inliers: usize,
    rmse: f64,
    quad: Option<Quad>,
}

/// Classifies one plate image against every template in `registry`.
///
/// Any failure short of a configuration mismatch (plate too small to
/// preprocess or build a pyramid, no matches, rejected fit, implausible
/// quad) yields `Normal`.
pub fn recognize(plate: &GrayImage, registry: &Registry, params: &PipelineParams) -> Result<RecognitionResult> {
    if registry.extraction_params() != &params.sift {
        return Err(Error::Config(
            "pipeline SIFT parameters differ from the registry's extraction parameters".into(),
        ));
    }
    let mut timing = StageTiming::default();
    let empty_diagnostics = || {
        registry
            .templates()
            .iter()
            .map(|t| TemplateDiagnostic {
                label: t.label.clone(),
                raw_matches: 0,
                inliers: 0,
                reproj_rmse: None,
            })
            .collect::<Vec<_>>()
    };
    let normal = |diagnostics, timing| RecognitionResult {
        classification: Classification::Normal,
        diagnostics,
        timing,
    };

    let t0 = Instant::now();
    let pre = preprocess_with_origin(plate, &params.preprocess);
    timing.preprocess_ms = ms(t0);
    let (processed, origin) = match pre {
        Ok(v) => v,
        Err(Error::Dimension(_)) => return Ok(normal(empty_diagnostics(), timing)),
        Err(e) => return Err(e),
    };

    let t0 = Instant::now();
    let features = match extract_features(&processed, &params.sift) {
        Ok(f) => f,
        Err(Error::Dimension(_)) => Vec::new(),
        Err(e) => return Err(e),
    };
    timing.extract_ms = ms(t0);
    let query: Vec<Descriptor> = features.iter().map(|f| f.descriptor.clone()).collect();

    let mut diagnostics = Vec::with_capacity(registry.len());
    let mut verified = Vec::new();
    for t in registry.templates() {
        let t0 = Instant::now();
        let matches = match_descriptors(&query, &t.descriptors, params.ratio);
        timing.match_ms += ms(t0);

        let t0 = Instant::now();
        let corrs: Vec<Correspondence> = matches
            .iter()
            .map(|m| {
                let r = &t.keypoints[m.template_index];
                let q = &features[m.query_index].keypoint;
                Correspondence::new((r.x, r.y), (q.x, q.y))
            })
            .collect();
        let mut diag = TemplateDiagnostic {
            label: t.label.clone(),
            raw_matches: matches.len(),
            inliers: 0,
            reproj_rmse: None,
        };
        if let Ok(fit) = robust_fit(&corrs, &params.robust) {
            diag.inliers = fit.inliers.len();
            diag.reproj_rmse = Some(fit.reproj_rmse);
            verified.push(Verified {
                label: t.label.clone(),
                inliers: fit.inliers.len(),
                rmse: fit.reproj_rmse,
                quad: project_quad(&fit.h, t.image_size).ok(),
            });
        }
        timing.verify_ms += ms(t0);
        diagnostics.push(diag);
    }

    let winner = verified.into_iter().min_by(|a, b| {
        b.inliers
            .cmp(&a.inliers)
            .then(a.rmse.total_cmp(&b.rmse))
            .then_with(|| a.label.cmp(&b.label))
    });
    let Some(w) = winner else {
        return Ok(normal(diagnostics, timing));
    };
    let plate_area = (processed.width() * processed.height()) as f64;
    let (lo, hi) = params.quad_area_range;
    let quad = match w.quad {
        Some(q) if quad_is_convex(&q) && (lo * plate_area..=hi * plate_area).contains(&quad_area(&q)) => q,
        _ => return Ok(normal(diagnostics, timing)),
    };
    let quad = quad.map(|(x, y)| (x + origin.0 as f64, y + origin.1 as f64));
    Ok(RecognitionResult {
        classification: Classification::Special {
            label: w.label,
            quad,
            inlier_count: w.inliers,
            reproj_rmse: w.rmse,
        },
        diagnostics,
        timing,
    })
}

/// Detects plate candidates in `frame` and recognizes each crop. Quads are
/// shifted into frame coordinates; output follows candidate order.
pub fn classify_frame(
    frame: &GrayImage,
    registry: &Registry,
    detector_params: &DetectorParams,
    params: &PipelineParams,
) -> Result<Vec<(PlateCandidate, RecognitionResult)>> {
    let candidates = detect_candidates(frame, detector_params)?;
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut r = recognize(&c.crop(frame)?, registry, params)?;
        if let Classification::Special { quad, .. } = &mut r.classification {
            for p in quad.iter_mut() {
                p.0 += c.bbox.0 as f64;
                p.1 += c.bbox.1 as f64;
            }
        }
        out.push((c, r));
    }
    Ok(out)
}

fn ms(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64() * 1e3
}
