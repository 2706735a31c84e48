//! Exact nearest-neighbour descriptor matching with a distinctiveness
//! ratio test.

use crate::sift::Descriptor;

pub const DEFAULT_RATIO: f64 = 0.8;
/// Acceptance distance when the template holds a single descriptor.
pub const SINGLE_NEIGHBOR_MAX_DISTANCE: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub query_index: usize,
    pub template_index: usize,
    pub distance: f64,
    /// Nearest / second-nearest distance; 1 when there is no second neighbour.
    pub ratio: f64,
}

/// Brute-force matching of every query descriptor against the template set.
///
/// A query is kept iff `nearest / second < ratio_threshold`, or, with a
/// one-element template, iff `nearest < 0.7`. Output is sorted by ascending
/// distance, then query index.
pub fn match_descriptors(query: &[Descriptor], template: &[Descriptor], ratio_threshold: f64) -> Vec<Match> {
    if query.is_empty() || template.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (qi, q) in query.iter().enumerate() {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second = f64::INFINITY;
        for (ti, t) in template.iter().enumerate() {
            let d = q.squared_distance(t);
            if d < best.0 {
                second = best.0;
                best = (d, ti);
            } else if d < second {
                second = d;
            }
        }
        let distance = best.0.sqrt();
        let accept;
        let ratio;
        if template.len() == 1 {
            ratio = 1.0;
            accept = distance < SINGLE_NEIGHBOR_MAX_DISTANCE;
        } else {
            let second = second.sqrt();
            ratio = if second > 0.0 { distance / second } else { 1.0 };
            accept = ratio < ratio_threshold;
        }
        if accept {
            out.push(Match {
                query_index: qi,
                template_index: best.1,
                distance,
                ratio,
            });
        }
    }
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.query_index.cmp(&b.query_index)));
    out
}

/// Keeps the a→b matches whose reverse b→a match points back to the same
/// pair. `matches_ba` has query/template roles swapped.
pub fn cross_check(matches_ab: &[Match], matches_ba: &[Match]) -> Vec<Match> {
    matches_ab
        .iter()
        .filter(|m| {
            matches_ba
                .iter()
                .any(|r| r.query_index == m.template_index && r.template_index == m.query_index)
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sift::DESCRIPTOR_LEN;

    /// Unit vector with `cos(t)` on axis 0 and `sin(t)` on `axis`.
    fn on_circle(t: f64, axis: usize) -> Descriptor {
        let mut v = [0.0; DESCRIPTOR_LEN];
        v[0] = t.cos();
        v[axis] = t.sin();
        Descriptor::from_array(v)
    }

    /// Angle whose chord from axis 0 has the requested length.
    fn chord_angle(d: f64) -> f64 {
        2.0 * (d / 2.0).asin()
    }

    fn basis(i: usize) -> Descriptor {
        let mut v = [0.0; DESCRIPTOR_LEN];
        v[i] = 1.0;
        Descriptor::from_array(v)
    }

    #[test]
    fn self_match() {
        let set: Vec<Descriptor> = (0..5).map(basis).collect();
        let m = match_descriptors(&set, &set, DEFAULT_RATIO);
        assert_eq!(m.len(), 5);
        for x in &m {
            assert_eq!(x.query_index, x.template_index);
            assert_eq!(x.distance, 0.0);
            assert_eq!(x.ratio, 0.0);
        }
    }

    #[test]
    fn empty_inputs() {
        let set: Vec<Descriptor> = (0..3).map(basis).collect();
        assert!(match_descriptors(&set, &[], 0.8).is_empty());
        assert!(match_descriptors(&[], &set, 0.8).is_empty());
    }

    #[test]
    fn ratio_test_on_constructed_triple() {
        let q = basis(0);
        let t1 = on_circle(chord_angle(0.4), 1);
        let far = on_circle(chord_angle(0.9), 2);
        let near = on_circle(chord_angle(0.45), 2);
        assert!((q.distance(&t1) - 0.4).abs() < 1e-12);
        assert!((q.distance(&far) - 0.9).abs() < 1e-12);

        let m = match_descriptors(&[q.clone()], &[t1.clone(), far], 0.8);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].template_index, 0);
        assert!((m[0].ratio - 0.4 / 0.9).abs() < 1e-9);

        assert!(match_descriptors(&[q], &[t1, near], 0.8).is_empty());
    }

    #[test]
    fn single_template_uses_absolute_distance() {
        let q = basis(0);
        assert_eq!(match_descriptors(&[q.clone()], &[on_circle(chord_angle(0.5), 1)], 0.8).len(), 1);
        assert!(match_descriptors(&[q], &[on_circle(chord_angle(0.75), 1)], 0.8).is_empty());
    }

    fn m(q: usize, t: usize) -> Match {
        Match {
            query_index: q,
            template_index: t,
            distance: 0.1,
            ratio: 0.5,
        }
    }

    #[test]
    fn cross_check_cases() {
        let ab = vec![m(0, 1), m(1, 2), m(2, 0)];
        let ba = vec![m(1, 0), m(2, 1), m(0, 2)];
        assert_eq!(cross_check(&ab, &ba), ab);
        assert!(cross_check(&ab, &[]).is_empty());
        let ba_broken = vec![m(1, 0), m(2, 1), m(0, 1)];
        assert_eq!(cross_check(&ab, &ba_broken), vec![m(0, 1), m(1, 2)]);
    }
}
