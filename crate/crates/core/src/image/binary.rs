use std::collections::VecDeque;

use super::{quantize, GrayImage};
use crate::error::{Error, Result};

/// Row-major boolean mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} mask entries for a {width}x{height} image",
                mask.len()
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.mask[y * self.width + x] = v;
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count_true(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Number of set pixels inside the inclusive rectangle.
    pub fn count_in(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> usize {
        (y0..=y1)
            .map(|y| self.mask[y * self.width + x0..=y * self.width + x1].iter().filter(|&&b| b).count())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Fixed(f32),
    Otsu,
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Otsu
    }
}

/// Otsu threshold over the 256-bin histogram of quantized intensities.
///
/// Returns `(k + 0.5) / 255` for the first bin `k` maximizing the
/// between-class variance, so that `v > t` is exactly "bin above `k`".
pub fn otsu_threshold(img: &GrayImage) -> f32 {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[quantize(v) as usize] += 1;
    }
    let total = img.data().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best_k = 0usize;
    let mut best_var = -1.0f64;
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    for (k, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += k as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_k = k;
        }
    }
    (best_k as f32 + 0.5) / 255.0
}

/// `mask[p] = img[p] > threshold`.
pub fn binarize(img: &GrayImage, method: Threshold) -> Result<BinaryImage> {
    let t = match method {
        Threshold::Fixed(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Parameter(format!("fixed threshold {t} outside [0, 1]")));
            }
            t
        }
        Threshold::Otsu => otsu_threshold(img),
    };
    Ok(BinaryImage {
        width: img.width(),
        height: img.height(),
        mask: img.data().iter().map(|&v| v > t).collect(),
    })
}

/// Row-wise dilation by a `1 × (2·half_width + 1)` segment.
pub fn dilate_horizontal(img: &BinaryImage, half_width: usize) -> Result<BinaryImage> {
    if half_width < 1 {
        return Err(Error::Parameter("dilation half width must be >= 1".into()));
    }
    let (w, h) = (img.width, img.height);
    let mut out = BinaryImage::new(w, h);
    for y in 0..h {
        let row = &img.mask[y * w..(y + 1) * w];
        // distance to the most recent set pixel on the left, then the right
        let mut last: Option<usize> = None;
        for x in 0..w {
            if row[x] {
                last = Some(x);
            }
            if matches!(last, Some(l) if x - l <= half_width) {
                out.mask[y * w + x] = true;
            }
        }
        let mut next: Option<usize> = None;
        for x in (0..w).rev() {
            if row[x] {
                next = Some(x);
            }
            if matches!(next, Some(n) if n - x <= half_width) {
                out.mask[y * w + x] = true;
            }
        }
    }
    Ok(out)
}

/// An 8-connected component of a binary mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Blob {
    pub label: u32,
    pub area: usize,
    /// Inclusive `(x_min, y_min, x_max, y_max)`.
    pub bbox: (usize, usize, usize, usize),
    pub fill_count: usize,
}

impl Blob {
    pub fn bbox_width(&self) -> usize {
        self.bbox.2 - self.bbox.0 + 1
    }

    pub fn bbox_height(&self) -> usize {
        self.bbox.3 - self.bbox.1 + 1
    }
}

/// 8-connected component labeling; labels follow the raster order of each
/// component's first pixel, starting at 1.
pub fn label_blobs(img: &BinaryImage) -> Vec<Blob> {
    let (w, h) = (img.width, img.height);
    let mut seen = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !img.mask[start] || seen[start] {
            continue;
        }
        let label = blobs.len() as u32 + 1;
        let (sx, sy) = (start % w, start / w);
        let mut blob = Blob {
            label,
            area: 0,
            bbox: (sx, sy, sx, sy),
            fill_count: 0,
        };
        seen[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % w, p / w);
            blob.area += 1;
            blob.bbox.0 = blob.bbox.0.min(x);
            blob.bbox.1 = blob.bbox.1.min(y);
            blob.bbox.2 = blob.bbox.2.max(x);
            blob.bbox.3 = blob.bbox.3.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let q = ny * w + nx;
                    if img.mask[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        blob.fill_count = blob.area;
        blobs.push(blob);
    }
    blobs
}
