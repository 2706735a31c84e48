//! Planar homography estimation: conditioned DLT, RANSAC outlier rejection
//! with least-squares refit, and projection of template outlines.
//!
//! Convention: `target ≅ H · reference`, reference points being template
//! coordinates and targets being input-image coordinates.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = (f64, f64);
pub type Quad = [Point; 4];

/// Homogeneous point `(x, y, w)`.
pub type HPoint = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub reference: HPoint,
    pub target: HPoint,
}

impl Correspondence {
    pub fn new(reference: Point, target: Point) -> Self {
        Self {
            reference: [reference.0, reference.1, 1.0],
            target: [target.0, target.1, 1.0],
        }
    }
}

/// 3×3 projective map with unit Frobenius norm and `h33 >= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    /// Canonicalizes an arbitrary non-zero matrix.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let n = m.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Degenerate("zero or non-finite homography".into()));
        }
        let mut h = m / n;
        let pivot = if h[(2, 2)] != 0.0 {
            h[(2, 2)]
        } else {
            // row-major first non-zero entry
            (0..9).map(|i| h[(i / 3, i % 3)]).find(|&v| v != 0.0).unwrap_or(1.0)
        };
        if pivot < 0.0 {
            h = -h;
        }
        Ok(Self(h))
    }

    pub fn identity() -> Self {
        Self::from_matrix(Matrix3::identity()).expect("identity is non-degenerate")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Row-major entries `h11 … h33`.
    pub fn entries(&self) -> [f64; 9] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Maps a homogeneous point.
    pub fn apply(&self, p: HPoint) -> HPoint {
        let v = self.0 * Vector3::new(p[0], p[1], p[2]);
        [v.x, v.y, v.z]
    }

    /// Maps and dehomogenizes; `None` when the image lies at infinity.
    pub fn project(&self, p: Point) -> Option<Point> {
        let [x, y, w] = self.apply([p.0, p.1, 1.0]);
        (w.abs() >= 1e-12).then(|| (x / w, y / w))
    }
}

/// Hartley conditioning: centroid to the origin, mean distance √2.
pub fn normalize_points(pts: &[HPoint]) -> Result<(Vec<HPoint>, Matrix3<f64>)> {
    let mut euclid = Vec::with_capacity(pts.len());
    for p in pts {
        if p[2] == 0.0 || !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Degenerate("point at infinity".into()));
        }
        euclid.push((p[0] / p[2], p[1] / p[2]));
    }
    if euclid.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: euclid.len(),
        });
    }
    let n = euclid.len() as f64;
    let cx = euclid.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = euclid.iter().map(|p| p.1).sum::<f64>() / n;
    let mean = euclid.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    if !(mean > 1e-12) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = euclid.iter().map(|p| [s * (p.0 - cx), s * (p.1 - cy), 1.0]).collect();
    Ok((out, t))
}

/// Normalized DLT over `≥ 4` correspondences.
pub fn dlt_homography(corrs: &[Correspondence]) -> Result<Homography> {
    if corrs.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: corrs.len(),
        });
    }
    let refs: Vec<HPoint> = corrs.iter().map(|c| c.reference).collect();
    let tgts: Vec<HPoint> = corrs.iter().map(|c| c.target).collect();
    let (nref, t_ref) = normalize_points(&refs)?;
    let (ntgt, t_tgt) = normalize_points(&tgts)?;

    // pad to at least 9 rows so the thin SVD exposes the full right basis
    let rows = (2 * corrs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (x, t)) in nref.iter().zip(&ntgt).enumerate() {
        let (xp, yp, wp) = (t[0], t[1], t[2]);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        for k in 0..3 {
            a[(r0, 3 + k)] = -wp * x[k];
            a[(r0, 6 + k)] = yp * x[k];
            a[(r1, k)] = wp * x[k];
            a[(r1, 6 + k)] = -xp * x[k];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let sv = &svd.singular_values;
    let (mut smallest, mut second) = (0usize, 0usize);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    if let [s0, s1, ..] = order[..] {
        smallest = s0;
        second = s1;
    }
    let largest = sv.max();
    if sv[second] <= 1e-9 * largest {
        return Err(Error::Degenerate("point configuration does not determine a homography".into()));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_tgt_inv = t_tgt
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular conditioning transform".into()))?;
    let out = Homography::from_matrix(t_tgt_inv * hn * t_ref)?;
    if out.determinant().abs() <= 1e-10 {
        return Err(Error::Degenerate("singular homography".into()));
    }
    Ok(out)
}

/// Distance between the dehomogenized `H · reference` and target;
/// `+∞` when the mapped point lies at infinity.
pub fn reprojection_error(h: &Homography, c: &Correspondence) -> f64 {
    let [x, y, w] = h.apply(c.reference);
    if w.abs() < 1e-12 || c.target[2] == 0.0 {
        return f64::INFINITY;
    }
    let (tx, ty) = (c.target[0] / c.target[2], c.target[1] / c.target[2]);
    (x / w - tx).hypot(y / w - ty)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustParams {
    pub inlier_threshold: f64,
    pub max_iters: usize,
    pub confidence: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RobustParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 3.0,
            max_iters: 2000,
            confidence: 0.995,
            min_inliers: 6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustFit {
    pub h: Homography,
    /// Indices into the input correspondences, ascending.
    pub inliers: Vec<usize>,
    pub reproj_rmse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitRejection {
    TooFewMatches(usize),
    NoConsensus,
    TooFewInliers(usize),
}

fn collinear(a: HPoint, b: HPoint, c: HPoint, tol: f64) -> bool {
    let [a, b, c] = [a, b, c].map(|p| [p[0] / p[2], p[1] / p[2]]);
    let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    area.abs() <= tol
}

fn sample_is_degenerate(pts: &[HPoint; 4], tol: f64) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES
        .iter()
        .any(|t| collinear(pts[t[0]], pts[t[1]], pts[t[2]], tol))
}

fn spread(pts: impl Iterator<Item = HPoint>) -> f64 {
    let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
    for p in pts {
        lo = (lo.0.min(p[0]), lo.1.min(p[1]));
        hi = (hi.0.max(p[0]), hi.1.max(p[1]));
    }
    (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-12)
}

/// Inliers under `h`, made one-to-one: scanning by ascending error, an
/// inlier is dropped if its reference or target point coincides with one
/// already kept. Returns sorted indices and their RMSE.
fn consensus(h: &Homography, corrs: &[Correspondence], threshold: f64) -> (Vec<usize>, f64) {
    let mut scored: Vec<(f64, usize)> = corrs
        .iter()
        .enumerate()
        .map(|(i, c)| (reprojection_error(h, c), i))
        .filter(|(e, _)| *e <= threshold)
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let same = |p: HPoint, q: HPoint| (p[0] / p[2] - q[0] / q[2]).abs() < 1e-9 && (p[1] / p[2] - q[1] / q[2]).abs() < 1e-9;
    let mut kept: Vec<(f64, usize)> = Vec::with_capacity(scored.len());
    for (e, i) in scored {
        let c = &corrs[i];
        if kept
            .iter()
            .any(|&(_, j)| same(corrs[j].reference, c.reference) || same(corrs[j].target, c.target))
        {
            continue;
        }
        kept.push((e, i));
    }
    let rmse = if kept.is_empty() {
        f64::INFINITY
    } else {
        (kept.iter().map(|(e, _)| e * e).sum::<f64>() / kept.len() as f64).sqrt()
    };
    let mut idx: Vec<usize> = kept.into_iter().map(|(_, i)| i).collect();
    idx.sort_unstable();
    (idx, rmse)
}

fn better(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> bool {
    a.0.len() > b.0.len() || (a.0.len() == b.0.len() && a.1 < b.1)
}

/// RANSAC over minimal 4-point samples, then DLT on the consensus set.
pub fn robust_fit(corrs: &[Correspondence], params: &RobustParams) -> std::result::Result<RobustFit, FitRejection> {
    let n = corrs.len();
    if n < 4 {
        return Err(FitRejection::TooFewMatches(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tol_ref = 1e-4 * spread(corrs.iter().map(|c| c.reference)).powi(2);
    let tol_tgt = 1e-4 * spread(corrs.iter().map(|c| c.target)).powi(2);

    let mut best: Option<(Homography, (Vec<usize>, f64))> = None;
    let mut needed = params.max_iters;
    let mut iter = 0;
    while iter < needed.min(params.max_iters) {
        iter += 1;
        let idx = sample(&mut rng, n, 4);
        let pick: [Correspondence; 4] = [corrs[idx.index(0)], corrs[idx.index(1)], corrs[idx.index(2)], corrs[idx.index(3)]];
        if sample_is_degenerate(&pick.map(|c| c.reference), tol_ref) || sample_is_degenerate(&pick.map(|c| c.target), tol_tgt) {
            continue;
        }
        let Ok(h) = dlt_homography(&pick) else {
            continue;
        };
        let score = consensus(&h, corrs, params.inlier_threshold);
        if best.as_ref().is_none_or(|(_, b)| better(&score, b)) {
            let ratio = score.0.len() as f64 / n as f64;
            let p_good = ratio.powi(4);
            needed = if p_good >= 1.0 - 1e-12 {
                iter
            } else if p_good <= 0.0 {
                params.max_iters
            } else {
                let k = (1.0 - params.confidence).ln() / (1.0 - p_good).ln();
                k.ceil().max(1.0).min(params.max_iters as f64) as usize
            };
            best = Some((h, score));
        }
    }

    let Some((mut h, mut score)) = best else {
        return Err(FitRejection::NoConsensus);
    };
    // least-squares refit on the consensus set until it stops changing
    for _ in 0..5 {
        if score.0.len() < 4 {
            break;
        }
        let subset: Vec<Correspondence> = score.0.iter().map(|&i| corrs[i]).collect();
        let Ok(refit) = dlt_homography(&subset) else {
            break;
        };
        let next = consensus(&refit, corrs, params.inlier_threshold);
        if next.0.len() < score.0.len() {
            break;
        }
        let stable = next.0 == score.0;
        h = refit;
        score = next;
        if stable {
            break;
        }
    }
    if score.0.len() < params.min_inliers.max(4) {
        return Err(FitRejection::TooFewInliers(score.0.len()));
    }
    Ok(RobustFit {
        h,
        inliers: score.0,
        reproj_rmse: score.1,
    })
}

/// Template corners `(0,0), (w−1,0), (w−1,h−1), (0,h−1)` mapped through `h`.
pub fn project_quad(h: &Homography, template_size: (usize, usize)) -> Result<Quad> {
    let (w, ht) = (template_size.0 as f64 - 1.0, template_size.1 as f64 - 1.0);
    let corners = [(0.0, 0.0), (w, 0.0), (w, ht), (0.0, ht)];
    let mut out = [(0.0, 0.0); 4];
    for (o, c) in out.iter_mut().zip(corners) {
        *o = h.project(c).ok_or(Error::DegenerateProjection)?;
    }
    Ok(out)
}

/// Shoelace area (positive for either winding).
pub fn quad_area(q: &Quad) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let (a, b) = (q[i], q[(i + 1) % 4]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s.abs()
}

/// True when all turns share one sign, which for four vertices also rules
/// out self-intersection.
pub fn quad_is_convex(q: &Quad) -> bool {
    let mut sign = 0.0;
    for i in 0..4 {
        let (a, b, c) = (q[i], q[(i + 1) % 4], q[(i + 2) % 4]);
        let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
        if cross.abs() < 1e-12 {
            return false;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}
