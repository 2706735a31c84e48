use std::f64::consts::TAU;

use super::orientation::gradient_at;
use super::scale_space::ScaleSpace;
use super::Keypoint;

pub const DESCRIPTOR_LEN: usize = 128;
pub const DESCRIPTOR_CLAMP: f64 = 0.2;

const SPATIAL_BINS: usize = 4;
const ANGLE_BINS: usize = 8;
/// Width of one spatial cell in units of the keypoint's octave-local sigma.
const CELL_SCALE: f64 = 3.0;

/// Unit-norm 128-element gradient histogram (4×4 cells × 8 orientations).
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor(pub(crate) [f64; DESCRIPTOR_LEN]);

impl Descriptor {
    /// Normalizes `raw` to unit length and then limits every component to
    /// `0.2` while keeping unit length. `None` for a zero vector or one
    /// with too few non-zero components to satisfy both constraints.
    pub fn normalized(raw: &[f64; DESCRIPTOR_LEN]) -> Option<Self> {
        clamp_normalize(raw).map(Descriptor)
    }

    /// Wraps an already-normalized vector (used when loading from disk).
    pub fn from_array(v: [f64; DESCRIPTOR_LEN]) -> Self {
        Descriptor(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.squared_distance(other).sqrt()
    }

    pub fn squared_distance(&self, other: &Descriptor) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Scales to unit norm, then finds the largest scale `λ` such that
/// `min(λ·v_i, 0.2)` still has unit norm. This is the fixed point of
/// repeated clamp-and-renormalize, reached in one step.
fn clamp_normalize(raw: &[f64; DESCRIPTOR_LEN]) -> Option<[f64; DESCRIPTOR_LEN]> {
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 1e-12) || !norm.is_finite() {
        return None;
    }
    let unit: Vec<f64> = raw.iter().map(|v| v / norm).collect();
    let mut sorted = unit.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cap2 = DESCRIPTOR_CLAMP * DESCRIPTOR_CLAMP;
    let mut scale = None;
    for m in 0..=DESCRIPTOR_LEN {
        let budget = 1.0 - m as f64 * cap2;
        if budget < 0.0 {
            break;
        }
        if m == DESCRIPTOR_LEN {
            if budget.abs() < 1e-12 {
                scale = Some(f64::INFINITY);
            }
            break;
        }
        // sum of squares of the unsaturated tail
        let tail: f64 = sorted[m..].iter().map(|v| v * v).sum();
        if sorted[m] > 0.0 {
            let lambda = (budget / tail).sqrt();
            let head_ok = m == 0 || lambda * sorted[m - 1] >= DESCRIPTOR_CLAMP;
            if head_ok && lambda * sorted[m] <= DESCRIPTOR_CLAMP {
                scale = Some(lambda);
                break;
            }
        }
    }
    let lambda = scale?;
    let mut out = [0.0; DESCRIPTOR_LEN];
    for (o, u) in out.iter_mut().zip(&unit) {
        *o = (lambda * u).min(DESCRIPTOR_CLAMP);
    }
    // absorb rounding so the norm is 1 to machine precision
    let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    for o in &mut out {
        *o = (*o / n).min(DESCRIPTOR_CLAMP);
    }
    Some(out)
}

/// Raw (unnormalized) 4×4×8 histogram around an oriented keypoint.
/// Returns `None` when no sample of the window lies inside the image.
fn raw_histogram(kp: &Keypoint, ss: &ScaleSpace) -> Option<[f64; DESCRIPTOR_LEN]> {
    let step = f64::from(ss.step(kp.octave));
    let img = &ss.octaves[kp.octave].images[kp.scale_index];
    let (x, y, sigma) = (kp.x / step, kp.y / step, kp.sigma / step);
    let d = SPATIAL_BINS as f64;
    let cell = CELL_SCALE * sigma;
    let diag = ((img.width() * img.width() + img.height() * img.height()) as f64).sqrt();
    let radius = (cell * std::f64::consts::SQRT_2 * (d + 1.0) * 0.5).round().min(diag) as isize;
    let (cos_t, sin_t) = (kp.orientation.cos() / cell, kp.orientation.sin() / cell);
    let weight_denom = 2.0 * (0.5 * d) * (0.5 * d);
    let (cx, cy) = (x.round() as isize, y.round() as isize);

    let mut hist = [0.0; DESCRIPTOR_LEN];
    let mut contributed = false;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let ox = (cx + dx) as f64 - x;
            let oy = (cy + dy) as f64 - y;
            // offset in the keypoint frame, in cell units
            let c_rot = ox * cos_t + oy * sin_t;
            let r_rot = -ox * sin_t + oy * cos_t;
            let cbin = c_rot + 0.5 * d - 0.5;
            let rbin = r_rot + 0.5 * d - 0.5;
            if cbin <= -1.0 || rbin <= -1.0 || cbin >= d || rbin >= d {
                continue;
            }
            let Some((mag, theta)) = gradient_at(img, cx + dx, cy + dy) else {
                continue;
            };
            contributed = true;
            let weight = (-(c_rot * c_rot + r_rot * r_rot) / weight_denom).exp() * mag;
            let obin = (theta - kp.orientation).rem_euclid(TAU) / TAU * ANGLE_BINS as f64;

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0, o0) = (r0 as isize, c0 as isize, o0 as isize);
            for (ri, wr) in [(r0, 1.0 - fr), (r0 + 1, fr)] {
                if ri < 0 || ri >= SPATIAL_BINS as isize {
                    continue;
                }
                for (ci, wc) in [(c0, 1.0 - fc), (c0 + 1, fc)] {
                    if ci < 0 || ci >= SPATIAL_BINS as isize {
                        continue;
                    }
                    for (oi, wo) in [(o0, 1.0 - fo), (o0 + 1, fo)] {
                        let oi = oi.rem_euclid(ANGLE_BINS as isize) as usize;
                        let idx = (ri as usize * SPATIAL_BINS + ci as usize) * ANGLE_BINS + oi;
                        hist[idx] += weight * wr * wc * wo;
                    }
                }
            }
        }
    }
    contributed.then_some(hist)
}

/// Descriptors for oriented keypoints. Keypoints whose window has no
/// in-image sample, or whose gradients vanish, are dropped.
pub fn compute_descriptors(kps: &[Keypoint], ss: &ScaleSpace) -> Vec<(Keypoint, Descriptor)> {
    kps.iter()
        .filter_map(|kp| {
            let raw = raw_histogram(kp, ss)?;
            Descriptor::normalized(&raw).map(|d| (kp.clone(), d))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check(d: &Descriptor) {
        assert!((d.norm() - 1.0).abs() < 1e-9);
        assert!(d.as_slice().iter().all(|&v| v >= 0.0 && v <= DESCRIPTOR_CLAMP + 1e-9));
    }

    #[test]
    fn zero_vector_has_no_descriptor() {
        assert!(Descriptor::normalized(&[0.0; DESCRIPTOR_LEN]).is_none());
    }

    #[test]
    fn spiky_vector_is_capped() {
        let mut raw = [0.01; DESCRIPTOR_LEN];
        raw[3] = 10.0;
        raw[77] = 5.0;
        let d = Descriptor::normalized(&raw).unwrap();
        check(&d);
        assert!((d.as_slice()[3] - DESCRIPTOR_CLAMP).abs() < 1e-12);
    }

    #[test]
    fn too_few_components_cannot_be_capped() {
        let mut raw = [0.0; DESCRIPTOR_LEN];
        for v in raw.iter_mut().take(10) {
            *v = 1.0;
        }
        assert!(Descriptor::normalized(&raw).is_none());
    }

    #[test]
    fn flat_vector_unchanged() {
        let d = Descriptor::normalized(&[1.0; DESCRIPTOR_LEN]).unwrap();
        let expect = 1.0 / (DESCRIPTOR_LEN as f64).sqrt();
        assert!(d.as_slice().iter().all(|&v| (v - expect).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn normalization_invariants(raw in proptest::collection::vec(0.0f64..10.0, DESCRIPTOR_LEN)) {
            let arr: [f64; DESCRIPTOR_LEN] = raw.try_into().unwrap();
            if let Some(d) = Descriptor::normalized(&arr) {
                prop_assert!((d.norm() - 1.0).abs() < 1e-9);
                prop_assert!(d.as_slice().iter().all(|&v| v <= DESCRIPTOR_CLAMP + 1e-9));
            }
        }

        #[test]
        fn clamp_preserves_order(raw in proptest::collection::vec(0.0f64..10.0, DESCRIPTOR_LEN)) {
            let arr: [f64; DESCRIPTOR_LEN] = raw.clone().try_into().unwrap();
            if let Some(d) = Descriptor::normalized(&arr) {
                for i in 0..DESCRIPTOR_LEN {
                    for j in 0..DESCRIPTOR_LEN {
                        if raw[i] < raw[j] {
                            prop_assert!(d.as_slice()[i] <= d.as_slice()[j] + 1e-12);
                        }
                    }
                }
            }
        }
    }
}
