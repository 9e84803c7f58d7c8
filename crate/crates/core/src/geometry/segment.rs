use super::Vec3;

const EPS: f64 = 1e-300;

pub fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= EPS {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest points between segments `[p1, q1]` and `[p2, q2]`.
///
/// Handles degenerate (point) segments and parallel segments; for parallel
/// segments one of the equally close pairs is returned.
pub fn closest_points_between_segments(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (Vec3, Vec3) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    (p1 + d1 * s, p2 + d2 * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
        let n = 400;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let x = p1 + (q1 - p1) * (i as f64 / n as f64);
            let y = closest_point_on_segment(&x, p2, q2);
            best = best.min((x - y).norm());
        }
        best
    }

    #[test]
    fn skew_segments() {
        let (a, b) = closest_points_between_segments(
            &Vec3::new(-1.0, 0.0, 0.0),
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::new(0.0, -1.0, 0.5),
            &Vec3::new(0.0, 1.0, 0.5),
        );
        assert!((a - Vec3::zeros()).norm() < 1e-15);
        assert!((b - Vec3::new(0.0, 0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn parallel_overlapping_segments() {
        let (a, b) = closest_points_between_segments(
            &Vec3::new(0.0, 0.0, 0.0),
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::new(0.5, 0.3, 0.0),
            &Vec3::new(1.5, 0.3, 0.0),
        );
        assert!(((b - a).norm() - 0.3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_sampled_distance(
            c in proptest::array::uniform12(-1.0f64..1.0)
        ) {
            let p1 = Vec3::new(c[0], c[1], c[2]);
            let q1 = Vec3::new(c[3], c[4], c[5]);
            let p2 = Vec3::new(c[6], c[7], c[8]);
            let q2 = Vec3::new(c[9], c[10], c[11]);
            let (a, b) = closest_points_between_segments(&p1, &q1, &p2, &q2);
            let d = (b - a).norm();
            let brute = brute_distance(&p1, &q1, &p2, &q2);
            // sampling can only overestimate the true minimum
            prop_assert!(d <= brute + 1e-12);
            prop_assert!(brute - d <= 2.0 * (q1 - p1).norm() / 400.0 + 1e-12);
        }
    }
}
