#![allow(dead_code)]

use platesift::image::{gaussian_blur, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random ellipses and rectangles on a mid-gray field, lightly smoothed.
pub fn textured_image(size: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = GrayImage::filled(size, size, 0.5);
    let shapes = size * size / 600;
    for _ in 0..shapes {
        let cx = rng.random_range(0.0..size as f32);
        let cy = rng.random_range(0.0..size as f32);
        let rx = rng.random_range(2.0..12.0f32);
        let ry = rng.random_range(2.0..12.0f32);
        let v = rng.random_range(0.05..0.95f32);
        let ellipse = rng.random_bool(0.5);
        let x0 = (cx - rx).max(0.0) as usize;
        let x1 = ((cx + rx) as usize).min(size - 1);
        let y0 = (cy - ry).max(0.0) as usize;
        let y1 = ((cy + ry) as usize).min(size - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = (x as f32 - cx) / rx;
                let dy = (y as f32 - cy) / ry;
                if !ellipse || dx * dx + dy * dy <= 1.0 {
                    img.set(x, y, v);
                }
            }
        }
    }
    gaussian_blur(&img, 1.0).unwrap()
}

/// Inverse-mapped bilinear warp: `dst(p) = src(inv(p))`, `fill` outside.
pub fn warp(src: &GrayImage, w: usize, h: usize, inv: impl Fn(f64, f64) -> (f64, f64), fill: f32) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        let (u, v) = inv(x as f64, y as f64);
        if u < 0.0 || v < 0.0 || u > (src.width() - 1) as f64 || v > (src.height() - 1) as f64 {
            fill
        } else {
            src.sample_bilinear(u as f32, v as f32)
        }
    })
}

/// Rotation by `deg` about the image centre, same canvas size.
/// Returns the image and the forward point map.
pub fn rotate(src: &GrayImage, deg: f64) -> (GrayImage, impl Fn(f64, f64) -> (f64, f64)) {
    let t = deg.to_radians();
    let (c, s) = (t.cos(), t.sin());
    let cx = (src.width() - 1) as f64 / 2.0;
    let cy = (src.height() - 1) as f64 / 2.0;
    let img = warp(src, src.width(), src.height(), |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + c * dx + s * dy, cy - s * dx + c * dy)
    }, 0.5);
    let fwd = move |x: f64, y: f64| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + c * dx - s * dy, cy + s * dx + c * dy)
    };
    (img, fwd)
}

/// Uniform scaling with pixel-centre alignment.
pub fn scale(src: &GrayImage, factor: f64) -> (GrayImage, impl Fn(f64, f64) -> (f64, f64)) {
    let w = (src.width() as f64 * factor).round() as usize;
    let h = (src.height() as f64 * factor).round() as usize;
    let img = platesift::image::resize_bilinear(src, w, h).unwrap();
    let fx = w as f64 / src.width() as f64;
    let fy = h as f64 / src.height() as f64;
    let fwd = move |x: f64, y: f64| ((x + 0.5) * fx - 0.5, (y + 0.5) * fy - 0.5);
    (img, fwd)
}

/// Fraction of reference keypoints (those mapping at least `margin` px
/// inside the target) with a target keypoint within `tol` px.
pub fn repeatability(
    reference: &[(f64, f64)],
    target: &[(f64, f64)],
    map: impl Fn(f64, f64) -> (f64, f64),
    target_size: (usize, usize),
    margin: f64,
    tol: f64,
) -> (f64, usize) {
    let mut visible = 0;
    let mut hit = 0;
    for &(x, y) in reference {
        let (u, v) = map(x, y);
        if u < margin || v < margin || u > target_size.0 as f64 - margin || v > target_size.1 as f64 - margin {
            continue;
        }
        visible += 1;
        if target.iter().any(|&(a, b)| (a - u).hypot(b - v) <= tol) {
            hit += 1;
        }
    }
    (hit as f64 / visible.max(1) as f64, visible)
}

pub const PREFIXES: [&str; 6] = ["PERODUA", "PROTON", "SATRIA", "TIARA", "PUTRAJAYA", "PUTRA"];

/// Rendered word images for the six prefixes, built once per test binary.
pub fn prefix_templates() -> &'static [(String, GrayImage)] {
    use platesift::synth::{render_word, WordStyle};
    static CELL: std::sync::OnceLock<Vec<(String, GrayImage)>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        PREFIXES
            .iter()
            .map(|l| (l.to_string(), render_word(l, &WordStyle::default()).unwrap()))
            .collect()
    })
}

pub fn prefix_registry() -> &'static platesift::registry::Registry {
    use platesift::registry::Registry;
    use platesift::sift::SiftParams;
    static CELL: std::sync::OnceLock<Registry> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        prefix_templates()
            .iter()
            .fold(Registry::new(SiftParams::default()), |r, (l, img)| r.enroll(l, img).unwrap())
    })
}

fn inside_convex(q: &[(f64, f64); 4], p: (f64, f64)) -> bool {
    let mut sign = 0.0;
    for i in 0..4 {
        let (a, b) = (q[i], q[(i + 1) % 4]);
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

/// Intersection over union of two convex quads, by sampling a 0.5 px grid.
pub fn quad_iou(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> f64 {
    let xs = a.iter().chain(b).map(|p| p.0);
    let ys = a.iter().chain(b).map(|p| p.1);
    let (x0, x1) = (xs.clone().fold(f64::MAX, f64::min), xs.fold(f64::MIN, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::MAX, f64::min), ys.fold(f64::MIN, f64::max));
    let (mut inter, mut uni) = (0usize, 0usize);
    let mut y = y0;
    while y <= y1 {
        let mut x = x0;
        while x <= x1 {
            let (ia, ib) = (inside_convex(a, (x, y)), inside_convex(b, (x, y)));
            inter += usize::from(ia && ib);
            uni += usize::from(ia || ib);
            x += 0.5;
        }
        y += 0.5;
    }
    inter as f64 / uni.max(1) as f64
}

use nalgebra::{Matrix3, Vector3};
use platesift::homography::Correspondence;

/// Random homography close enough to a similarity to stay well conditioned
/// over a 640×480 canvas.
pub fn random_h(rng: &mut impl Rng) -> Matrix3<f64> {
    let a: f64 = rng.random_range(-0.5..0.5);
    let s: f64 = rng.random_range(0.6..1.6);
    Matrix3::new(
        s * a.cos() + rng.random_range(-0.1..0.1),
        -s * a.sin() + rng.random_range(-0.1..0.1),
        rng.random_range(-50.0..50.0),
        s * a.sin() + rng.random_range(-0.1..0.1),
        s * a.cos() + rng.random_range(-0.1..0.1),
        rng.random_range(-50.0..50.0),
        rng.random_range(-2e-4..2e-4),
        rng.random_range(-2e-4..2e-4),
        1.0,
    )
}

pub fn apply_h(h: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    let v = h * Vector3::new(p.0, p.1, 1.0);
    (v.x / v.z, v.y / v.z)
}

pub fn exact_corrs(h: &Matrix3<f64>, n: usize, rng: &mut impl Rng) -> Vec<Correspondence> {
    (0..n)
        .map(|_| {
            let p = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            Correspondence::new(p, apply_h(h, p))
        })
        .collect()
}


use platesift::detector::{filter_blobs, DetectorParams, PlateCandidate};
use platesift::image::{binarize, dilate_horizontal, label_blobs, sobel_vertical};

/// Vertical stripes of width 4 over the inclusive rectangle.
pub fn stripes(img: &mut GrayImage, x0: usize, y0: usize, w: usize, h: usize) {
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            img.set(x, y, if ((x - x0) / 4) % 2 == 0 { 0.1 } else { 0.9 });
        }
    }
}

pub fn random_frame(seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.random_range(64..240), rng.random_range(48..180));
    let mut f = GrayImage::from_fn(w, h, |_, _| 0.45 + 0.1 * rng.random::<f32>());
    for _ in 0..rng.random_range(1..4) {
        let (rw, rh) = (rng.random_range(20..w.min(140)), rng.random_range(4..h.min(50)));
        let (x0, y0) = (rng.random_range(0..w - rw), rng.random_range(0..h - rh));
        stripes(&mut f, x0, y0, rw, rh);
    }
    f
}

pub fn manual_detect(frame: &GrayImage, p: &DetectorParams) -> Vec<PlateCandidate> {
    let edges = binarize(&sobel_vertical(frame).unwrap(), p.threshold).unwrap();
    let blobs = label_blobs(&dilate_horizontal(&edges, p.dilation_half_width).unwrap());
    let mut c = filter_blobs(&blobs, &edges, p);
    c.sort_by(|a, b| b.area.total_cmp(&a.area).then((a.bbox.1, a.bbox.0).cmp(&(b.bbox.1, b.bbox.0))));
    c
}

