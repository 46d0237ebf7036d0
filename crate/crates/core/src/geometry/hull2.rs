//! Planar convex-hull helpers backing the exact n = 2 geometry paths.

/// Monotone-chain convex hull in counterclockwise order.
///
/// Strict turns only: collinear and duplicate points are dropped, so the
/// result holds exactly the extreme points. Degenerate inputs collapse to a
/// single point or a segment.
pub(crate) fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }

    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };

    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.is_empty() {
        // All input points collinear; sort/dedup above kept the extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    lower
}

pub(crate) fn dist_point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Distance from a point to a convex polygon given as a CCW hull.
pub(crate) fn dist_point_hull(p: (f64, f64), hull: &[(f64, f64)]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => ((p.0 - hull[0].0).powi(2) + (p.1 - hull[0].1).powi(2)).sqrt(),
        2 => dist_point_segment(p, hull[0], hull[1]),
        m => {
            let mut inside = true;
            let mut best = f64::INFINITY;
            for i in 0..m {
                let a = hull[i];
                let b = hull[(i + 1) % m];
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross < 0.0 {
                    inside = false;
                }
                best = best.min(dist_point_segment(p, a, b));
            }
            if inside {
                0.0
            } else {
                best
            }
        }
    }
}

/// Largest pairwise distance among hull points.
///
/// Hulls of the clouds handled here stay small (tens of vertices), so the
/// quadratic scan is cheaper and sturdier than rotating calipers.
pub(crate) fn hull_diameter(hull: &[(f64, f64)]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..hull.len() {
        for j in (i + 1)..hull.len() {
            let d2 = (hull[i].0 - hull[j].0).powi(2) + (hull[i].1 - hull[j].1).powi(2);
            if d2 > best {
                best = d2;
            }
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (0.5, 0.5),
            (0.5, 0.0), // collinear edge point, must be dropped
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!(hull.contains(&(0.0, 0.0)) && hull.contains(&(1.0, 1.0)));
    }

    #[test]
    fn hull_of_collinear_points_is_segment() {
        let pts = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.5, 0.5)];
        let hull = convex_hull(&pts);
        assert_eq!(hull, vec![(0.0, 0.0), (2.0, 2.0)]);
    }

    #[test]
    fn segment_distance_matches_hand_values() {
        assert_eq!(dist_point_segment((0.5, 2.0), (0.0, 0.0), (1.0, 0.0)), 2.0);
        assert_eq!(dist_point_segment((-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)), 1.0);
    }

    #[test]
    fn hull_distance_zero_inside() {
        let hull = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert_eq!(dist_point_hull((0.5, 0.5), &hull), 0.0);
        let d = dist_point_hull((2.0, 2.0), &hull);
        assert!((d - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diameter_of_unit_square_hull() {
        let hull = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert!((hull_diameter(&hull) - 2.0f64.sqrt()).abs() < 1e-15);
    }
}
