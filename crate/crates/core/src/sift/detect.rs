use nalgebra::{Matrix3, Vector3};

use super::scale_space::{DogImage, DogSpace, ScaleSpace};
use super::Keypoint;

/// Integer scale-space extremum prior to sub-pixel refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub octave: usize,
    /// DoG layer, `1..=s`.
    pub scale_index: usize,
    pub x: usize,
    pub y: usize,
}

const MAX_REFINE_STEPS: usize = 5;

fn is_extremum(layers: &[DogImage], si: usize, x: usize, y: usize) -> bool {
    let v = layers[si].at(x, y);
    let mut greater = true;
    let mut less = true;
    for li in si - 1..=si + 1 {
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                if li == si && nx == x && ny == y {
                    continue;
                }
                let n = layers[li].at(nx, ny);
                greater &= v > n;
                less &= v < n;
                if !greater && !less {
                    return false;
                }
            }
        }
    }
    greater || less
}

/// Strict 26-neighbour extrema over the interior DoG layers, keeping those
/// with `|D| >= 0.5 · contrast_prefilter`.
pub fn detect_extrema(dog: &DogSpace, contrast_prefilter: f32) -> Vec<Candidate> {
    let floor = 0.5 * contrast_prefilter;
    let mut out = Vec::new();
    for (o, layers) in dog.octaves.iter().enumerate() {
        if layers.len() < 3 {
            continue;
        }
        let (w, h) = (layers[0].width, layers[0].height);
        if w < 3 || h < 3 {
            continue;
        }
        for si in 1..layers.len() - 1 {
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    if layers[si].at(x, y).abs() >= floor && is_extremum(layers, si, x, y) {
                        out.push(Candidate {
                            octave: o,
                            scale_index: si,
                            x,
                            y,
                        });
                    }
                }
            }
        }
    }
    out
}

struct Local {
    gradient: Vector3<f64>,
    hessian: Matrix3<f64>,
    value: f64,
}

fn local_fit(layers: &[DogImage], si: usize, x: usize, y: usize) -> Local {
    let d = |s: usize, xx: usize, yy: usize| f64::from(layers[s].at(xx, yy));
    let v = d(si, x, y);
    let dx = 0.5 * (d(si, x + 1, y) - d(si, x - 1, y));
    let dy = 0.5 * (d(si, x, y + 1) - d(si, x, y - 1));
    let ds = 0.5 * (d(si + 1, x, y) - d(si - 1, x, y));
    let dxx = d(si, x + 1, y) + d(si, x - 1, y) - 2.0 * v;
    let dyy = d(si, x, y + 1) + d(si, x, y - 1) - 2.0 * v;
    let dss = d(si + 1, x, y) + d(si - 1, x, y) - 2.0 * v;
    let dxy = 0.25 * (d(si, x + 1, y + 1) - d(si, x - 1, y + 1) - d(si, x + 1, y - 1) + d(si, x - 1, y - 1));
    let dxs = 0.25 * (d(si + 1, x + 1, y) - d(si + 1, x - 1, y) - d(si - 1, x + 1, y) + d(si - 1, x - 1, y));
    let dys = 0.25 * (d(si + 1, x, y + 1) - d(si + 1, x, y - 1) - d(si - 1, x, y + 1) + d(si - 1, x, y - 1));
    Local {
        gradient: Vector3::new(dx, dy, ds),
        hessian: Matrix3::new(dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss),
        value: v,
    }
}

/// Principal-curvature ratio test on the 2×2 spatial Hessian: passes iff
/// `det > 0` and `tr² / det < (r + 1)² / r`.
pub fn passes_edge_test(dxx: f64, dyy: f64, dxy: f64, edge_ratio: f64) -> bool {
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > 0.0 && tr * tr / det < (edge_ratio + 1.0).powi(2) / edge_ratio
}

/// Quadratic sub-pixel/sub-scale localization followed by the contrast and
/// edge-response filters.
pub fn refine_keypoints(
    cands: &[Candidate],
    dog: &DogSpace,
    ss: &ScaleSpace,
    contrast_threshold: f32,
    edge_ratio: f32,
) -> Vec<Keypoint> {
    let s = ss.scales_per_octave as f64;
    let mut out = Vec::new();
    'cand: for c in cands {
        let layers = &dog.octaves[c.octave];
        let (w, h) = (layers[0].width, layers[0].height);
        let (mut x, mut y, mut si) = (c.x, c.y, c.scale_index);
        let mut fit = None;
        for _ in 0..MAX_REFINE_STEPS {
            if si < 1 || si + 1 >= layers.len() || x < 1 || y < 1 || x + 1 >= w || y + 1 >= h {
                continue 'cand;
            }
            let local = local_fit(layers, si, x, y);
            let Some(offset) = local.hessian.lu().solve(&(-local.gradient)) else {
                continue 'cand;
            };
            if !offset.iter().all(|v| v.is_finite()) {
                continue 'cand;
            }
            if offset.iter().all(|v| v.abs() < 0.5) {
                fit = Some((local, offset));
                break;
            }
            let nx = x as f64 + offset.x.round();
            let ny = y as f64 + offset.y.round();
            let ns = si as f64 + offset.z.round();
            if nx < 1.0 || ny < 1.0 || ns < 1.0 {
                continue 'cand;
            }
            x = nx as usize;
            y = ny as usize;
            si = ns as usize;
        }
        let Some((local, offset)) = fit else {
            continue;
        };

        let contrast = (local.value + 0.5 * local.gradient.dot(&offset)).abs();
        if contrast < f64::from(contrast_threshold) {
            continue;
        }
        let hm = &local.hessian;
        if !passes_edge_test(hm[(0, 0)], hm[(1, 1)], hm[(0, 1)], f64::from(edge_ratio)) {
            continue;
        }

        let step = f64::from(ss.step(c.octave));
        let sigma = f64::from(ss.base_sigma) * 2f64.powf((si as f64 + offset.z) / s) * step;
        out.push(Keypoint {
            x: (x as f64 + offset.x) * step,
            y: (y as f64 + offset.y) * step,
            sigma,
            orientation: 0.0,
            octave: c.octave,
            scale_index: si,
            contrast,
        });
    }
    out
}
