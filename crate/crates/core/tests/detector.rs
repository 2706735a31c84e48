mod common;

use common::{manual_detect as manual, random_frame, stripes};
use platesift::detector::{detect_candidates, DetectorParams, PlateCandidate};
use platesift::image::GrayImage;

fn contained_fraction(c: &PlateCandidate, (x0, y0, w, h): (usize, usize, usize, usize)) -> f64 {
    let ix = (c.bbox.2.min(x0 + w - 1) + 1).saturating_sub(c.bbox.0.max(x0));
    let iy = (c.bbox.3.min(y0 + h - 1) + 1).saturating_sub(c.bbox.1.max(y0));
    (ix * iy) as f64 / (w * h) as f64
}

#[test]
fn stripe_rectangle_gives_one_candidate() {
    let mut frame = GrayImage::filled(320, 240, 0.5);
    stripes(&mut frame, 100, 60, 120, 40);
    let c = detect_candidates(&frame, &DetectorParams::default()).unwrap();
    assert_eq!(c.len(), 1);
    assert!(contained_fraction(&c[0], (100, 60, 120, 40)) >= 0.9);

    stripes(&mut frame, 100, 180, 120, 6);
    let c = detect_candidates(&frame, &DetectorParams::default()).unwrap();
    assert_eq!(c.len(), 1);
    assert!(c[0].bbox.1 < 120, "thin rectangle survived: {:?}", c[0].bbox);
}

#[test]
fn equals_manual_composition() {
    let loose = DetectorParams {
        area_range: (50.0, 1e6),
        aspect_range: (0.5, 20.0),
        ..DetectorParams::default()
    };
    for seed in 0..20 {
        let f = random_frame(seed);
        for p in [DetectorParams::default(), loose.clone()] {
            assert_eq!(detect_candidates(&f, &p).unwrap(), manual(&f, &p), "seed {seed}");
        }
    }
}

#[test]
fn widening_ranges_never_loses_candidates() {
    let base = DetectorParams::default();
    let wider = [
        DetectorParams { area_range: (100.0, 1e6), ..base.clone() },
        DetectorParams { aspect_range: (0.5, 30.0), ..base.clone() },
        DetectorParams { min_compactness: 0.1, ..base.clone() },
        DetectorParams { fill_ratio_range: (0.0, 10.0), ..base.clone() },
    ];
    for seed in 0..20 {
        let f = random_frame(seed);
        let n = detect_candidates(&f, &base).unwrap().len();
        for w in &wider {
            assert!(detect_candidates(&f, w).unwrap().len() >= n, "seed {seed}");
        }
    }
}

#[test]
fn candidates_are_in_bounds_and_consistent() {
    let p = DetectorParams {
        area_range: (50.0, 1e6),
        aspect_range: (0.5, 20.0),
        ..DetectorParams::default()
    };
    for seed in 0..20 {
        let f = random_frame(seed);
        let c = detect_candidates(&f, &p).unwrap();
        assert_eq!(c, detect_candidates(&f, &p).unwrap());
        for k in &c {
            assert!(k.bbox.2 < f.width() && k.bbox.3 < f.height());
            assert!(k.aspect > 0.0 && k.compactness > 0.0 && k.compactness <= 1.0 && k.fill_ratio >= 0.0);
            assert_eq!(k.crop(&f).unwrap().dimensions(), (k.width(), k.height()));
        }
        for pair in c.windows(2) {
            assert!(pair[0].area >= pair[1].area);
        }
    }
}

#[test]
fn roi_offsets_into_frame_coordinates() {
    let mut frame = GrayImage::filled(320, 240, 0.5);
    stripes(&mut frame, 150, 150, 120, 40);
    let p = DetectorParams {
        roi: Some((100, 100, 319, 239)),
        ..DetectorParams::default()
    };
    let c = detect_candidates(&frame, &p).unwrap();
    assert_eq!(c.len(), 1);
    assert!(contained_fraction(&c[0], (150, 150, 120, 40)) >= 0.9);
}
