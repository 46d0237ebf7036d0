//! Minimax spreading of unit vectors: minimize the largest pairwise inner
//! product over the unit sphere.
//!
//! Riemannian projected gradient descent on a log-sum-exp smoothing of the
//! max, with the temperature annealed downward and multiple restarts. The
//! smoothed optimum of a symmetric configuration coincides with the minimax
//! optimum, so known optima (simplex, icosahedron) are recovered to tight
//! tolerance.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESTARTS: u64 = 16;
const STAGES: &[(f64, usize)] = &[
    (1e-1, 400),
    (3e-2, 400),
    (1e-2, 600),
    (3e-3, 600),
    (1e-3, 800),
    (3e-4, 800),
    (1e-4, 1500),
    (3e-5, 2500),
];

/// Best configuration over all restarts, judged by the true (unsmoothed)
/// maximum pairwise inner product. Deterministic in (count, dim, seed).
pub(crate) fn optimize(count: usize, dim: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut best: Option<(f64, Vec<DVector<f64>>)> = None;
    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart + 1);
        let mut p: Vec<DVector<f64>> = (0..count).map(|_| random_unit(&mut rng, dim)).collect();
        descend(&mut p);
        let gamma = true_max_inner(&p);
        if best.as_ref().is_none_or(|(g, _)| gamma < *g) {
            best = Some((gamma, p));
        }
    }
    best.expect("at least one restart").1
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        // Box-Muller pairs give an isotropic Gaussian to normalize.
        let v = DVector::from_fn(dim, |_, _| {
            let u1: f64 = rng.gen::<f64>().max(1e-300);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn true_max_inner(p: &[DVector<f64>]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            best = best.max(p[i].dot(&p[j]));
        }
    }
    best
}

fn smoothed(p: &[DVector<f64>], tau: f64) -> f64 {
    let mut inners = Vec::with_capacity(p.len() * (p.len() - 1) / 2);
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            inners.push(p[i].dot(&p[j]));
        }
    }
    let m = inners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = inners.iter().map(|x| ((x - m) / tau).exp()).sum();
    m + tau * s.ln()
}

/// Tangent-projected gradient of the smoothed objective.
fn gradient(p: &[DVector<f64>], tau: f64) -> Vec<DVector<f64>> {
    let n = p.len();
    let mut inners = vec![0.0; n * n];
    let mut m = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let x = p[i].dot(&p[j]);
            inners[i * n + j] = x;
            m = m.max(x);
        }
    }
    let mut total = 0.0;
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = ((inners[i * n + j] - m) / tau).exp();
            weights[i * n + j] = w;
            total += w;
        }
    }
    let mut grad: Vec<DVector<f64>> = (0..n).map(|i| DVector::zeros(p[i].len())).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = weights[i * n + j] / total;
            if w > 0.0 {
                grad[i] += &p[j] * w;
                grad[j] += &p[i] * w;
            }
        }
    }
    for i in 0..n {
        let radial = grad[i].dot(&p[i]);
        grad[i] -= &p[i] * radial;
    }
    grad
}

fn descend(p: &mut Vec<DVector<f64>>) {
    let mut step = 0.1;
    for &(tau, iters) in STAGES {
        for _ in 0..iters {
            let f = smoothed(p, tau);
            let g = gradient(p, tau);
            let gn2: f64 = g.iter().map(|gi| gi.norm_squared()).sum();
            if gn2 < 1e-28 {
                break;
            }
            let mut accepted = false;
            for _ in 0..30 {
                let candidate: Vec<DVector<f64>> = p
                    .iter()
                    .zip(&g)
                    .map(|(pi, gi)| {
                        let moved = pi - gi * step;
                        let n = moved.norm();
                        moved / n
                    })
                    .collect();
                if smoothed(&candidate, tau) <= f - 1e-4 * step * gn2 {
                    *p = candidate;
                    step = (step * 1.25).min(1.0);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                step = 0.1; // reset for the next temperature
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_optimum_in_3d() {
        // Four vectors in R^3: regular tetrahedron, gamma = -1/3.
        let p = optimize(4, 3, 1);
        assert!((true_max_inner(&p) - (-1.0 / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn icosahedron_optimum() {
        let p = optimize(12, 3, 1);
        assert!(
            (true_max_inner(&p) - 1.0 / 5.0f64.sqrt()).abs() < 1e-6,
            "gamma {} vs 1/sqrt(5) {}",
            true_max_inner(&p),
            1.0 / 5.0f64.sqrt()
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let a = optimize(7, 3, 9);
        let b = optimize(7, 3, 9);
        assert_eq!(a, b);
    }
}
