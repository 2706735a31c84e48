//! Plate localization in a frame: vertical Sobel edges, thresholding,
//! horizontal dilation into blobs, and geometric/density blob filtering.

use crate::error::{Error, Result};
use crate::image::{binarize, dilate_horizontal, label_blobs, sobel_vertical, BinaryImage, Blob, GrayImage, Threshold};

pub const MIN_FRAME_SIDE: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorParams {
    pub dilation_half_width: usize,
    pub area_range: (f64, f64),
    pub aspect_range: (f64, f64),
    pub min_compactness: f64,
    pub fill_ratio_range: (f64, f64),
    pub threshold: Threshold,
    /// Optional inclusive region of interest `(x0, y0, x1, y1)`.
    pub roi: Option<(usize, usize, usize, usize)>,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            dilation_half_width: 8,
            area_range: (500.0, 50000.0),
            aspect_range: (2.0, 8.0),
            min_compactness: 0.5,
            fill_ratio_range: (0.05, 1.5),
            threshold: Threshold::Otsu,
            roi: None,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("area", self.area_range),
            ("aspect", self.aspect_range),
            ("fill ratio", self.fill_ratio_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo <= hi) {
                return Err(Error::Parameter(format!("empty {name} range [{lo}, {hi}]")));
            }
        }
        if self.dilation_half_width < 1 {
            return Err(Error::Parameter("dilation half width must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlateCandidate {
    /// Inclusive `(x_min, y_min, x_max, y_max)` in frame pixels.
    pub bbox: (usize, usize, usize, usize),
    pub area: f64,
    pub aspect: f64,
    pub compactness: f64,
    pub fill_ratio: f64,
    pub score: f64,
}

impl PlateCandidate {
    pub fn width(&self) -> usize {
        self.bbox.2 - self.bbox.0 + 1
    }

    pub fn height(&self) -> usize {
        self.bbox.3 - self.bbox.1 + 1
    }

    pub fn crop(&self, frame: &GrayImage) -> Result<GrayImage> {
        frame.crop(self.bbox.0, self.bbox.1, self.bbox.2, self.bbox.3)
    }
}

/// Applies the area, aspect, compactness and fill-ratio predicates.
///
/// `edges` is the pre-dilation edge mask; the fill ratio is its
/// `#true / max(#false, 1)` inside each blob's bounding box.
pub fn filter_blobs(blobs: &[Blob], edges: &BinaryImage, params: &DetectorParams) -> Vec<PlateCandidate> {
    let mut out = Vec::new();
    for b in blobs {
        let (w, h) = (b.bbox_width() as f64, b.bbox_height() as f64);
        let area = b.area as f64;
        let aspect = w / h;
        let compactness = area / (w * h);
        let set = edges.count_in(b.bbox.0, b.bbox.1, b.bbox.2, b.bbox.3);
        let unset = (b.bbox_width() * b.bbox_height() - set).max(1);
        let fill_ratio = set as f64 / unset as f64;
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        if within(area, params.area_range)
            && within(aspect, params.aspect_range)
            && compactness >= params.min_compactness
            && within(fill_ratio, params.fill_ratio_range)
        {
            out.push(PlateCandidate {
                bbox: b.bbox,
                area,
                aspect,
                compactness,
                fill_ratio,
                score: area,
            });
        }
    }
    out
}

/// Runs the five-stage pipeline and returns candidates by descending area
/// (ties by position).
pub fn detect_candidates(frame: &GrayImage, params: &DetectorParams) -> Result<Vec<PlateCandidate>> {
    params.validate()?;
    let (fw, fh) = frame.dimensions();
    if fw < MIN_FRAME_SIDE || fh < MIN_FRAME_SIDE {
        return Err(Error::Dimension(format!("{fw}x{fh} frame is below {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}")));
    }
    let (region, origin) = match params.roi {
        Some((x0, y0, x1, y1)) => (frame.crop(x0, y0, x1.min(fw - 1), y1.min(fh - 1))?, (x0, y0)),
        None => (frame.clone(), (0, 0)),
    };
    if region.width() < 3 || region.height() < 3 {
        return Err(Error::Dimension("region of interest smaller than 3x3".into()));
    }
    let edges = binarize(&sobel_vertical(&region)?, params.threshold)?;
    let blobs = label_blobs(&dilate_horizontal(&edges, params.dilation_half_width)?);
    let mut cands = filter_blobs(&blobs, &edges, params);
    for c in &mut cands {
        c.bbox = (c.bbox.0 + origin.0, c.bbox.1 + origin.1, c.bbox.2 + origin.0, c.bbox.3 + origin.1);
    }
    cands.sort_by(|a, b| b.area.total_cmp(&a.area).then((a.bbox.1, a.bbox.0).cmp(&(b.bbox.1, b.bbox.0))));
    Ok(cands)
}
