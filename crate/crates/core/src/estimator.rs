//! Set-valued estimation of the initial state and the landmark from the
//! times of positive proximity hits.
//!
//! Two hits at times k > j pin the relative displacement of the trajectory:
//! both states sit in the same radius-r ball around the landmark, so
//! |x_k - x_j| <= 2r and therefore |(A^k - A^j) x0 + (s_k - s_j)| <= 2r with
//! s_t the zero-state response. Each hit pair is an ellipsoid constraint on
//! x0; the initial-state estimate is the running intersection of the initial
//! box with those ellipsoids. The landmark estimate intersects the forward
//! images of the x0 estimate bloated by the sensing radius, one image per
//! hit time.
//!
//! Everything stored here is an outer approximation, so a true value never
//! gets excluded: capping the ellipsoid count or keeping a stale forward
//! image only loosens the estimate.

use crate::dynamics::{min_singular_value, LinSys, PowerTable};
use crate::geometry::{
    cloud_diameter, Ellipsoid, EstimateSet, GeometryError, Polytope, EPS_MEMBERSHIP,
};
use nalgebra::{DMatrix, DVector};
use std::fmt;

/// Most ellipsoid constraints kept per initial-state estimate. The loosest
/// ones are evicted first; the widest-separation pair is always kept.
pub const ELLIPSOID_CAP: usize = 64;

/// A stored landmark constraint is rebuilt only after its enclosure
/// half-diagonal could shrink by this factor.
const RETIGHTEN_RATIO: f64 = 0.5;

/// Landmark constraints whose enclosure half-diagonal is below this fraction
/// of the sensing radius are left alone for good.
const SLACK_FLOOR_FACTOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum EstError {
    Geometry(GeometryError),
    NonPositiveRadius(f64),
    DimensionMismatch { expected: usize, got: usize },
    TimeOutOfOrder { time: usize, current: usize },
    SingularPair { k: usize, j: usize },
}

impl fmt::Display for EstError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstError::Geometry(e) => write!(f, "geometry: {e}"),
            EstError::NonPositiveRadius(r) => {
                write!(f, "sensing radius must be positive and finite, got {r}")
            }
            EstError::DimensionMismatch { expected, got } => {
                write!(f, "expected dimension {expected}, got {got}")
            }
            EstError::TimeOutOfOrder { time, current } => {
                write!(
                    f,
                    "hit times must be strictly increasing, got {time} at {current}"
                )
            }
            EstError::SingularPair { k, j } => {
                write!(f, "A^{k} - A^{j} is singular, pair carries no ellipsoid")
            }
        }
    }
}

impl std::error::Error for EstError {}

impl From<GeometryError> for EstError {
    fn from(e: GeometryError) -> Self {
        EstError::Geometry(e)
    }
}

/// Center of the hit-pair ellipsoid, -(A^k - A^j)^{-1} (s_k - s_j),
/// with both zero-state responses unrolled from scratch.
pub fn compute_mu(
    sys: &LinSys,
    controls: &[DVector<f64>],
    k: usize,
    j: usize,
) -> Result<DVector<f64>, EstError> {
    assert!(
        j < k && k <= controls.len(),
        "need j < k within the control history"
    );
    let sk = sys.zero_state_response(&controls[..k]);
    let sj = sys.zero_state_response(&controls[..j]);
    let mut table = sys.power_table();
    let ak = table.power(k).clone();
    let m = ak - table.power(j);
    solve_center(&m, &(sk - sj)).ok_or(EstError::SingularPair { k, j })
}

/// Shape matrix of the hit-pair ellipsoid, M' M / (4 r^2) for M = A^k - A^j.
pub fn compute_ellipsoid_matrix(m: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    m.transpose() * m / (4.0 * r * r)
}

fn solve_center(m: &DMatrix<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(&(-d))
}

fn pair_ellipsoid(
    powers: &mut PowerTable,
    responses: &[DVector<f64>],
    k: usize,
    j: usize,
    r: f64,
) -> Result<Ellipsoid, EstError> {
    let ak = powers.power(k).clone();
    let m = ak - powers.power(j);
    let d = &responses[k] - &responses[j];
    let mu = solve_center(&m, &d).ok_or(EstError::SingularPair { k, j })?;
    Ok(Ellipsoid::new(mu, compute_ellipsoid_matrix(&m, r))?)
}

/// Tight axis-aligned enclosure of the affine image T box + d.
fn affine_box_image(
    t: &DMatrix<f64>,
    d: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let center = (lo + hi) * 0.5;
    let hw = (hi - lo) * 0.5;
    let out_center = t * center + d;
    let out_hw = t.abs() * hw;
    (&out_center - &out_hw, out_center + out_hw)
}

fn half_diagonal(lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    0.5 * (hi - lo).norm()
}

struct PairInfo {
    separation: usize,
    diameter: f64,
}

struct LandmarkConstraint {
    time: usize,
    half_diagonal: f64,
}

/// Incremental estimator fed one control per step and one call per positive
/// measurement.
pub struct EstimatorState {
    sys: LinSys,
    r: f64,
    x0: EstimateSet,
    m: EstimateSet,
    powers: PowerTable,
    responses: Vec<DVector<f64>>,
    positives: Vec<usize>,
    pairs: Vec<PairInfo>,
    landmark_cons: Vec<LandmarkConstraint>,
    max_separation: usize,
    diam_bound: f64,
}

impl EstimatorState {
    pub fn new(
        sys: LinSys,
        x0_box: Polytope,
        m_box: Polytope,
        r: f64,
        grid_resolution: usize,
    ) -> Result<Self, EstError> {
        if !(r.is_finite() && r > 0.0) {
            return Err(EstError::NonPositiveRadius(r));
        }
        let n = sys.state_dim();
        for dim in [x0_box.dim(), m_box.dim()] {
            if dim != n {
                return Err(EstError::DimensionMismatch {
                    expected: n,
                    got: dim,
                });
            }
        }
        let x0 = EstimateSet::with_grid_cloud(x0_box, grid_resolution)?;
        let m = EstimateSet::with_grid_cloud(m_box, grid_resolution)?;
        let diam_bound = x0.base().diameter();
        let powers = sys.power_table();
        Ok(EstimatorState {
            sys,
            r,
            x0,
            m,
            powers,
            responses: vec![DVector::zeros(n)],
            positives: Vec::new(),
            pairs: Vec::new(),
            landmark_cons: Vec::new(),
            max_separation: 0,
            diam_bound,
        })
    }

    /// Advances the zero-state response by one applied control.
    pub fn record_control(&mut self, u: &DVector<f64>) {
        let next = self.sys.step(
            self.responses.last().expect("response history starts at 0"),
            u,
        );
        self.responses.push(next);
    }

    /// Steps recorded so far; measurements are indexed by this clock.
    pub fn current_time(&self) -> usize {
        self.responses.len() - 1
    }

    pub fn sensing_radius(&self) -> f64 {
        self.r
    }

    pub fn sys(&self) -> &LinSys {
        &self.sys
    }

    pub fn x0_estimate(&self) -> &EstimateSet {
        &self.x0
    }

    pub fn m_estimate(&self) -> &EstimateSet {
        &self.m
    }

    pub fn positives(&self) -> &[usize] {
        &self.positives
    }

    /// Largest time separation between two positive measurements so far.
    pub fn max_separation(&self) -> usize {
        self.max_separation
    }

    /// Analytic initial-estimate diameter bound 4 r |(A^d - I)^{-1}|
    /// at the widest pair separation d, clipped to the initial box diameter
    /// (which also covers the no-pair case).
    pub fn diam_bound(&self) -> f64 {
        self.diam_bound
    }

    /// Ingests a positive measurement at the current time: intersects the
    /// initial-state estimate with one ellipsoid per earlier hit, refreshes
    /// the landmark estimate, and returns the estimate of the current state
    /// (forward image of the initial estimate restricted to the sensing
    /// neighborhood of the landmark estimate held before this call).
    pub fn observe_positive(&mut self) -> Result<EstimateSet, EstError> {
        let k = self.current_time();
        if let Some(&last) = self.positives.last() {
            if k <= last {
                return Err(EstError::TimeOutOfOrder {
                    time: k,
                    current: last,
                });
            }
        }

        let mut batch = Vec::with_capacity(self.positives.len());
        for idx in 0..self.positives.len() {
            let j = self.positives[idx];
            let ell = pair_ellipsoid(&mut self.powers, &self.responses, k, j, self.r)?;
            self.pairs.push(PairInfo {
                separation: k - j,
                diameter: ell.diameter(),
            });
            self.max_separation = self.max_separation.max(k - j);
            batch.push(ell);
        }
        self.x0.add_ellipsoids(batch);
        self.evict_to_cap();

        if self.max_separation >= 1 {
            let shifted = self.powers.power(self.max_separation)
                - DMatrix::<f64>::identity(self.sys.state_dim(), self.sys.state_dim());
            let analytic = 4.0 * self.r / min_singular_value(&shifted);
            self.diam_bound = analytic.min(self.x0.base().diameter());
        }

        let xk = self.current_state_estimate(k);

        // Landmark constraint for this hit uses the just-updated initial
        // estimate; older constraints are rebuilt once theirs would shrink
        // enough to matter.
        let (lo, hi) = self.forward_box(k);
        self.landmark_cons.push(LandmarkConstraint {
            time: k,
            half_diagonal: half_diagonal(&lo, &hi),
        });
        self.m.add_bloated(Polytope::from_box(&lo, &hi)?, self.r);
        self.retighten_landmark_constraints()?;

        self.positives.push(k);
        Ok(xk)
    }

    /// Keeps the constraint count at the cap by dropping the loosest
    /// ellipsoids; the widest-separation pair is exempt. The cloud was
    /// already filtered through dropped constraints, so eviction only
    /// loosens the membership oracle.
    fn evict_to_cap(&mut self) {
        while self.pairs.len() > ELLIPSOID_CAP {
            let protected = self
                .pairs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.separation.cmp(&b.1.separation).then(a.0.cmp(&b.0)))
                .map(|(i, _)| i)
                .expect("pair list is nonempty");
            let evict = self
                .pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != protected)
                .max_by(|a, b| a.1.diameter.total_cmp(&b.1.diameter))
                .map(|(i, _)| i)
                .expect("more pairs than the cap");
            self.pairs.remove(evict);
            self.x0.remove_ellipsoid(evict);
        }
    }

    /// Enclosure of the time-t image of the current initial estimate,
    /// A^t box + s_t in interval arithmetic.
    fn forward_box(&mut self, t: usize) -> (DVector<f64>, DVector<f64>) {
        let (lo, hi) = {
            let (l, h) = self.x0.constraint_aabb();
            (l.clone(), h.clone())
        };
        let s = self.responses[t].clone();
        affine_box_image(self.powers.power(t), &s, &lo, &hi)
    }

    fn retighten_landmark_constraints(&mut self) -> Result<(), EstError> {
        let floor = SLACK_FLOOR_FACTOR * self.r;
        for idx in 0..self.landmark_cons.len() {
            let current = self.landmark_cons[idx].half_diagonal;
            if current <= floor {
                continue;
            }
            let t = self.landmark_cons[idx].time;
            let (lo, hi) = self.forward_box(t);
            let candidate = half_diagonal(&lo, &hi);
            if candidate <= RETIGHTEN_RATIO * current {
                self.m
                    .replace_bloated(idx, Polytope::from_box(&lo, &hi)?, self.r);
                self.landmark_cons[idx].half_diagonal = candidate;
            }
        }
        Ok(())
    }

    /// Forward image of the initial estimate at time k intersected with the
    /// sensing neighborhood of the landmark estimate as held by the caller
    /// at entry (the k-th hit has not yet tightened it).
    fn current_state_estimate(&mut self, k: usize) -> EstimateSet {
        let (lo, hi) = self.forward_box(k);
        let base = Polytope::from_box(&lo, &hi).expect("forward box enclosure is a valid box");
        let (mlo, mhi) = self.m.constraint_aabb();
        let m_outer = Polytope::from_box(mlo, mhi).expect("landmark box is valid");
        let t = self.powers.power(k).clone();
        let s = &self.responses[k];
        let mut q = DVector::zeros(t.nrows());
        let mut cloud = Vec::new();
        for p in self.x0.cloud() {
            q.gemv(1.0, &t, p, 0.0);
            q += s;
            if crate::geometry::dist_to_polytope(&q, &m_outer) <= self.r + EPS_MEMBERSHIP {
                cloud.push(q.clone());
            }
        }
        EstimateSet::from_parts(base, Vec::new(), vec![(m_outer, self.r)], cloud)
    }
}

/// From-scratch estimates over a whole measurement record: every hit pair is
/// intersected (no constraint cap) and every landmark constraint uses the
/// final initial-state estimate. Serves as the reference the incremental
/// state must stay outside of.
pub struct Estimates {
    pub x0: EstimateSet,
    pub m: EstimateSet,
}

pub fn estimate(
    sys: &LinSys,
    x0_box: Polytope,
    m_box: Polytope,
    r: f64,
    controls: &[DVector<f64>],
    positive_times: &[usize],
) -> Result<Estimates, EstError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(EstError::NonPositiveRadius(r));
    }
    for w in positive_times.windows(2) {
        if w[1] <= w[0] {
            return Err(EstError::TimeOutOfOrder {
                time: w[1],
                current: w[0],
            });
        }
    }
    if let Some(&last) = positive_times.last() {
        assert!(
            last <= controls.len(),
            "hit time beyond the control history"
        );
    }

    let mut powers = sys.power_table();
    let mut responses = vec![DVector::zeros(sys.state_dim())];
    for u in controls {
        let next = sys.step(responses.last().expect("nonempty"), u);
        responses.push(next);
    }

    let mut x0 = EstimateSet::new(x0_box);
    for (b, &k) in positive_times.iter().enumerate() {
        for &j in &positive_times[..b] {
            let ell = pair_ellipsoid(&mut powers, &responses, k, j, r)?;
            x0.add_ellipsoid(ell);
        }
    }

    let mut m = EstimateSet::new(m_box);
    let (lo, hi) = {
        let (l, h) = x0.constraint_aabb();
        (l.clone(), h.clone())
    };
    for &t in positive_times {
        let (blo, bhi) = affine_box_image(powers.power(t), &responses[t], &lo, &hi);
        m.add_bloated(Polytope::from_box(&blo, &bhi)?, r);
    }

    Ok(Estimates { x0, m })
}

/// Diameter of a propagated point cloud, exposed for reporting.
pub fn propagated_cloud_diameter(points: &[DVector<f64>]) -> f64 {
    cloud_diameter(points)
}
