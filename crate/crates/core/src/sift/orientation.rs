use std::f64::consts::TAU;

use super::scale_space::ScaleSpace;
use super::Keypoint;
use crate::image::GrayImage;

pub const ORIENTATION_BINS: usize = 36;
const WINDOW_FACTOR: f64 = 1.5;

/// Gradient magnitude and direction (radians in `[0, 2π)`) by central
/// differences. `None` on the one-pixel border.
#[inline]
pub(crate) fn gradient_at(img: &GrayImage, x: isize, y: isize) -> Option<(f64, f64)> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    if x < 1 || y < 1 || x >= w - 1 || y >= h - 1 {
        return None;
    }
    let (xu, yu) = (x as usize, y as usize);
    let dx = f64::from(img.get(xu + 1, yu)) - f64::from(img.get(xu - 1, yu));
    let dy = f64::from(img.get(xu, yu + 1)) - f64::from(img.get(xu, yu - 1));
    let mag = dx.hypot(dy);
    let mut theta = dy.atan2(dx);
    if theta < 0.0 {
        theta += TAU;
    }
    Some((mag, theta))
}

/// Gaussian-weighted 36-bin orientation histogram around a point given in
/// octave-local coordinates. Votes are split linearly between the two
/// nearest bin centres (bin `i` is centred at `i · 10°`).
pub fn orientation_histogram(img: &GrayImage, x: f64, y: f64, sigma: f64) -> [f64; ORIENTATION_BINS] {
    let mut hist = [0.0; ORIENTATION_BINS];
    let weight_sigma = WINDOW_FACTOR * sigma;
    let radius = (3.0 * weight_sigma).round() as isize;
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let denom = 2.0 * weight_sigma * weight_sigma;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let Some((mag, theta)) = gradient_at(img, cx + dx, cy + dy) else {
                continue;
            };
            let rx = (cx + dx) as f64 - x;
            let ry = (cy + dy) as f64 - y;
            let weight = (-(rx * rx + ry * ry) / denom).exp();
            let pos = theta / TAU * ORIENTATION_BINS as f64;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % ORIENTATION_BINS;
            hist[lo] += weight * mag * (1.0 - frac);
            hist[(lo + 1) % ORIENTATION_BINS] += weight * mag * frac;
        }
    }
    hist
}

/// Peak orientations: the global maximum (lowest bin on ties) plus every
/// strict local peak within `peak_ratio` of it, each refined by a parabola
/// through the peak and its neighbours.
pub fn histogram_peaks(hist: &[f64; ORIENTATION_BINS], peak_ratio: f64) -> Vec<f64> {
    let n = ORIENTATION_BINS;
    let (max_bin, max) = hist
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let mut peaks = Vec::new();
    for i in 0..n {
        let l = hist[(i + n - 1) % n];
        let c = hist[i];
        let r = hist[(i + 1) % n];
        let is_peak = i == max_bin || (c > l && c > r && c >= peak_ratio * max);
        if !is_peak {
            continue;
        }
        let denom = l - 2.0 * c + r;
        let offset = if denom.abs() > 1e-12 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let mut angle = (i as f64 + offset) / n as f64 * TAU;
        angle = angle.rem_euclid(TAU);
        if angle >= TAU {
            angle = 0.0;
        }
        peaks.push(angle);
    }
    peaks
}

/// Replicates each keypoint once per dominant gradient orientation.
pub fn assign_orientations(kps: &[Keypoint], ss: &ScaleSpace, peak_ratio: f64) -> Vec<Keypoint> {
    let mut out = Vec::with_capacity(kps.len());
    for kp in kps {
        let step = f64::from(ss.step(kp.octave));
        let img = &ss.octaves[kp.octave].images[kp.scale_index];
        let hist = orientation_histogram(img, kp.x / step, kp.y / step, kp.sigma / step);
        for angle in histogram_peaks(&hist, peak_ratio) {
            out.push(Keypoint {
                orientation: angle,
                ..kp.clone()
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    #[test]
    fn ramp_orientation_follows_gradient() {
        for deg in [0.0f64, 33.0, 35.0, 127.0, 250.0, 359.0] {
            let t = deg.to_radians();
            let img = GrayImage::from_fn(41, 41, |x, y| {
                (0.5 + 0.008 * ((x as f64 - 20.0) * t.cos() + (y as f64 - 20.0) * t.sin())) as f32
            });
            let hist = orientation_histogram(&img, 20.0, 20.0, 3.0);
            let peaks = histogram_peaks(&hist, 0.8);
            assert_eq!(peaks.len(), 1, "{deg}: {peaks:?}");
            assert!(angle_diff(peaks[0], t) < 5f64.to_radians(), "{deg}: got {}", peaks[0].to_degrees());
        }
    }

    #[test]
    fn symmetric_blob_still_yields_an_orientation() {
        let img = GrayImage::from_fn(41, 41, |x, y| {
            let r2 = (x as f32 - 20.0).powi(2) + (y as f32 - 20.0).powi(2);
            0.2 + 0.6 * (-r2 / 32.0).exp()
        });
        let peaks = histogram_peaks(&orientation_histogram(&img, 20.0, 20.0, 3.0), 0.8);
        assert!(!peaks.is_empty());
        let flat = [1.0; ORIENTATION_BINS];
        assert_eq!(histogram_peaks(&flat, 0.8), vec![0.0]);
    }

    #[test]
    fn two_equal_populations_give_two_orientations() {
        // max(x, y) ramp: gradient 0° below the diagonal, 90° above it, and
        // the diagonal mirror swaps the two populations exactly
        let img = GrayImage::from_fn(41, 41, |x, y| 0.5 + 0.01 * (x.max(y) as f32 - 20.0));
        let hist = orientation_histogram(&img, 20.0, 20.0, 3.0);
        let peaks = histogram_peaks(&hist, 0.8);
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        assert!(peaks.iter().any(|&p| angle_diff(p, 0.0) < 5f64.to_radians()));
        assert!(peaks.iter().any(|&p| angle_diff(p, 90f64.to_radians()) < 5f64.to_radians()));
    }
}
