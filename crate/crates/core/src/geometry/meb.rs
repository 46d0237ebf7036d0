//! Minimum enclosing ball by Welzl's move-to-front algorithm, generalized to
//! arbitrary dimension.
//!
//! The recursion depth is bounded by the support-set size (at most n + 1
//! points), so large clouds are safe. Circumballs of support sets are solved
//! through an SVD least-squares system, which keeps degenerate (affinely
//! dependent) support sets from blowing up.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Ball, GeometryError};

/// Smallest ball containing every point, radius minimal up to 1e-9 relative.
///
/// Deterministic: the internal shuffle is seeded from the input length only,
/// so identical inputs give bit-identical balls.
pub fn min_enclosing_ball(points: &[DVector<f64>]) -> Result<Ball, GeometryError> {
    let first = points.first().ok_or(GeometryError::EmptyCloud)?;
    let dim = first.len();
    for p in points {
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eb2_1f00 ^ points.len() as u64);
    order.shuffle(&mut rng);
    let shuffled: Vec<&DVector<f64>> = order.iter().map(|&i| &points[i]).collect();

    let mut support: Vec<DVector<f64>> = Vec::with_capacity(dim + 1);
    let (center, radius) = welzl(&shuffled, &mut support, dim);
    Ball::new(center, radius.max(0.0))
}

fn welzl(
    points: &[&DVector<f64>],
    support: &mut Vec<DVector<f64>>,
    dim: usize,
) -> (DVector<f64>, f64) {
    let (mut center, mut radius) = circumball(support, dim);
    if support.len() == dim + 1 {
        return (center, radius);
    }
    for i in 0..points.len() {
        let p = points[i];
        if !ball_covers(&center, radius, p) {
            support.push(p.clone());
            let (c, r) = welzl(&points[..i], support, dim);
            support.pop();
            center = c;
            radius = r;
        }
    }
    (center, radius)
}

fn ball_covers(center: &DVector<f64>, radius: f64, p: &DVector<f64>) -> bool {
    if radius < 0.0 {
        return false;
    }
    let slack = 1e-12 * (1.0 + radius);
    (p - center).norm() <= radius + slack
}

/// Ball with the support set on its boundary and center in its affine hull.
///
/// An empty support yields a sentinel with negative radius that covers
/// nothing, which forces the first point onto the boundary.
fn circumball(support: &[DVector<f64>], dim: usize) -> (DVector<f64>, f64) {
    match support.len() {
        0 => (DVector::zeros(dim), -1.0),
        1 => (support[0].clone(), 0.0),
        m => {
            let q0 = &support[0];
            let mut mat = DMatrix::zeros(m - 1, dim);
            let mut rhs = DVector::zeros(m - 1);
            for i in 1..m {
                let d = &support[i] - q0;
                rhs[i - 1] = 0.5 * d.norm_squared();
                mat.row_mut(i - 1).copy_from(&d.transpose());
            }
            let svd = mat.svd(true, true);
            let rel = svd
                .solve(&rhs, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(dim));
            let center = q0 + rel;
            let radius = support
                .iter()
                .map(|q| (q - &center).norm())
                .fold(0.0, f64::max);
            (center, radius)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn v2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    /// Brute-force reference: scan candidate centers on a fine grid and keep
    /// the one minimizing the max distance. Accuracy is limited by the grid
    /// step, so comparisons use a matching tolerance.
    fn grid_oracle(points: &[DVector<f64>], lo: f64, hi: f64, steps: usize) -> (DVector<f64>, f64) {
        let mut best_c = points[0].clone();
        let mut best_r = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let c = v2(
                    lo + (hi - lo) * i as f64 / steps as f64,
                    lo + (hi - lo) * j as f64 / steps as f64,
                );
                let r = points.iter().map(|p| (p - &c).norm()).fold(0.0, f64::max);
                if r < best_r {
                    best_r = r;
                    best_c = c;
                }
            }
        }
        (best_c, best_r)
    }

    #[test]
    fn single_point_gives_zero_radius() {
        let b = min_enclosing_ball(&[v2(3.0, -1.0)]).unwrap();
        assert_eq!(b.center, v2(3.0, -1.0));
        assert_eq!(b.radius, 0.0);
    }

    #[test]
    fn antipodal_pair() {
        let b = min_enclosing_ball(&[v2(-1.0, 0.0), v2(1.0, 0.0)]).unwrap();
        assert!((b.radius - 1.0).abs() < 1e-12);
        assert!(b.center.norm() < 1e-12);
    }

    #[test]
    fn unit_square_matches_grid_oracle() {
        let pts = vec![v2(0.0, 0.0), v2(1.0, 0.0), v2(1.0, 1.0), v2(0.0, 1.0)];
        let b = min_enclosing_ball(&pts).unwrap();
        // Exact answer by symmetry: center (0.5, 0.5), radius sqrt(2)/2.
        assert!((b.radius - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((b.center[0] - 0.5).abs() < 1e-9 && (b.center[1] - 0.5).abs() < 1e-9);
        let (_, oracle_r) = grid_oracle(&pts, 0.3, 0.7, 80);
        assert!(b.radius <= oracle_r + 1e-9);
    }

    #[test]
    fn random_clouds_covered_and_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3, 5] {
            for _ in 0..40 {
                let n = rng.gen_range(1..40);
                let pts: Vec<DVector<f64>> = (0..n)
                    .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-5.0..5.0)))
                    .collect();
                let b = min_enclosing_ball(&pts).unwrap();
                let mut diam: f64 = 0.0;
                for i in 0..pts.len() {
                    let d = (&pts[i] - &b.center).norm();
                    assert!(d <= b.radius * (1.0 + 1e-9) + 1e-12, "point escapes ball");
                    for j in (i + 1)..pts.len() {
                        diam = diam.max((&pts[i] - &pts[j]).norm());
                    }
                }
                // Two-sided sanity: at least half the diameter, at most the
                // Jung bound sqrt(n / (2(n+1))) * diam.
                assert!(b.radius >= diam / 2.0 - 1e-9);
                let jung = diam * (dim as f64 / (2.0 * (dim as f64 + 1.0))).sqrt();
                assert!(b.radius <= jung + 1e-9, "radius beats Jung bound");
            }
        }
    }

    #[test]
    fn deterministic_for_identical_input() {
        let pts: Vec<DVector<f64>> = (0..50)
            .map(|i| v2((i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.61).cos() * 2.0))
            .collect();
        let a = min_enclosing_ball(&pts).unwrap();
        let b = min_enclosing_ball(&pts).unwrap();
        assert_eq!(a.center, b.center);
        assert_eq!(a.radius, b.radius);
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(
            min_enclosing_ball(&[]),
            Err(GeometryError::EmptyCloud)
        ));
    }
}
