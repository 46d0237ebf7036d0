//! Set primitives for set-membership state estimation: balls, ellipsoids,
//! vertex-represented polytopes, and constraint-list estimate sets carrying a
//! sample cloud.
//!
//! Sets stay symbolic (lists of constraints with exact membership oracles);
//! Minkowski sums with a ball are never materialized, membership goes through
//! `dist_to_polytope(x, P) <= r` instead. Every estimate set also carries a
//! finite sample cloud for empirical diameter tracking.

mod hull2;
mod meb;

pub use meb::min_enclosing_ball;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::fmt;

/// Slack applied to every membership test (quadratic forms and distances).
pub const EPS_MEMBERSHIP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    NegativeRadius,
    NegativeDiameter,
    NotSymmetric,
    NotPositiveDefinite,
    EmptyVertexSet,
    EmptyCloud,
    NonFiniteCoordinate,
    DimensionMismatch { expected: usize, got: usize },
    GridTooLarge { requested: usize },
    ZeroDimension,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NegativeRadius => write!(f, "radius must be nonnegative"),
            GeometryError::NegativeDiameter => write!(f, "diameter must be nonnegative"),
            GeometryError::NotSymmetric => write!(f, "shape matrix is not symmetric"),
            GeometryError::NotPositiveDefinite => {
                write!(f, "shape matrix is not positive definite")
            }
            GeometryError::EmptyVertexSet => write!(f, "polytope needs at least one vertex"),
            GeometryError::EmptyCloud => write!(f, "operation needs at least one point"),
            GeometryError::NonFiniteCoordinate => write!(f, "coordinates must be finite"),
            GeometryError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            GeometryError::GridTooLarge { requested } => {
                write!(
                    f,
                    "grid cloud of {requested} points exceeds the supported size"
                )
            }
            GeometryError::ZeroDimension => write!(f, "dimension must be at least 1"),
        }
    }
}

impl std::error::Error for GeometryError {}

fn check_finite(v: &DVector<f64>) -> Result<(), GeometryError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFiniteCoordinate)
    }
}

/// Euclidean ball B(center, radius).
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self, GeometryError> {
        check_finite(&center)?;
        if !radius.is_finite() || radius < 0.0 {
            return Err(GeometryError::NegativeRadius);
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        assert_eq!(x.len(), self.dim(), "ball membership: dimension mismatch");
        (x - &self.center).norm() <= self.radius + EPS_MEMBERSHIP
    }
}

/// Ellipsoid E(mu, P) = { x : (x - mu)^T P (x - mu) <= 1 } with P symmetric
/// positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    mu: DVector<f64>,
    p: DMatrix<f64>,
    // Cached at construction: per-axis half-widths of the bounding box
    // (sqrt of the diagonal of P^-1) and the diameter 2 / sqrt(lambda_min).
    halfwidths: DVector<f64>,
    diameter: f64,
}

impl Ellipsoid {
    pub fn new(mu: DVector<f64>, p: DMatrix<f64>) -> Result<Self, GeometryError> {
        check_finite(&mu)?;
        let n = mu.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: p.nrows().max(p.ncols()),
            });
        }
        if !p.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NonFiniteCoordinate);
        }
        let asym = (&p - p.transpose()).norm();
        if asym > 1e-9 * p.norm().max(f64::MIN_POSITIVE) {
            return Err(GeometryError::NotSymmetric);
        }
        let sym = (&p + p.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(GeometryError::NotPositiveDefinite);
        }
        // P^-1 through the eigendecomposition; only its diagonal is kept.
        let mut halfwidths = DVector::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let e = eig.eigenvectors[(i, j)];
                acc += e * e / eig.eigenvalues[j];
            }
            halfwidths[i] = acc.sqrt();
        }
        Ok(Ellipsoid {
            mu,
            p: sym,
            halfwidths,
            diameter: 2.0 / min_eig.sqrt(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Length of the longest axis, 2 / sqrt(lambda_min(P)).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        let n = self.dim();
        assert_eq!(x.len(), n, "ellipsoid quad: dimension mismatch");
        // Written out by hand: this runs once per cloud point per filter
        // pass, and the nalgebra expression allocates two temporaries.
        let mut total = 0.0;
        for j in 0..n {
            let dj = x[j] - self.mu[j];
            let mut col = 0.0;
            for i in 0..n {
                col += self.p[(i, j)] * (x[i] - self.mu[i]);
            }
            total += col * dj;
        }
        total
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.quad(x) <= 1.0 + EPS_MEMBERSHIP
    }

    /// Tight axis-aligned bounding box, mu_i +/- sqrt((P^-1)_ii).
    pub fn aabb(&self) -> (DVector<f64>, DVector<f64>) {
        (&self.mu - &self.halfwidths, &self.mu + &self.halfwidths)
    }

    /// Exact maximum of the quadratic form over a box (attained at a corner,
    /// since the form is convex).
    pub fn max_quad_over_box(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
        let n = self.dim();
        assert!(n <= 26, "corner enumeration limited to small dimensions");
        let mut best = f64::NEG_INFINITY;
        let mut corner = DVector::zeros(n);
        for mask in 0u64..(1u64 << n) {
            for i in 0..n {
                corner[i] = if mask >> i & 1 == 1 { hi[i] } else { lo[i] };
            }
            best = best.max(self.quad(&corner));
        }
        best
    }
}

/// Convex polytope in vertex representation; stored vertices are exactly the
/// extreme points.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    vertices: Vec<DVector<f64>>,
    dim: usize,
    lo: DVector<f64>,
    hi: DVector<f64>,
    axis_box: bool,
}

impl Polytope {
    /// Builds a polytope from arbitrary points, pruning everything that is a
    /// convex combination of the others. For n = 2 the surviving vertices are
    /// stored in counterclockwise hull order.
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self, GeometryError> {
        let first = points.first().ok_or(GeometryError::EmptyVertexSet)?;
        let dim = first.len();
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        for p in &points {
            if p.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            check_finite(p)?;
        }
        let vertices = match dim {
            1 => {
                let min = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let max = points
                    .iter()
                    .map(|p| p[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                if min == max {
                    vec![DVector::from_vec(vec![min])]
                } else {
                    vec![DVector::from_vec(vec![min]), DVector::from_vec(vec![max])]
                }
            }
            2 => {
                let flat: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                hull2::convex_hull(&flat)
                    .into_iter()
                    .map(|(x, y)| DVector::from_vec(vec![x, y]))
                    .collect()
            }
            _ => prune_extreme(points),
        };
        Ok(Self::assemble(vertices, dim))
    }

    /// Axis-aligned box with the given corner bounds.
    pub fn from_box(lo: &DVector<f64>, hi: &DVector<f64>) -> Result<Self, GeometryError> {
        let n = lo.len();
        if n == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if hi.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: hi.len(),
            });
        }
        check_finite(lo)?;
        check_finite(hi)?;
        if (0..n).any(|i| lo[i] > hi[i]) {
            return Err(GeometryError::EmptyVertexSet);
        }
        assert!(n <= 26, "corner enumeration limited to small dimensions");
        let mut corners = Vec::with_capacity(1 << n);
        for mask in 0u64..(1u64 << n) {
            let c = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] });
            if !corners.contains(&c) {
                corners.push(c);
            }
        }
        let mut p = Self::assemble(corners, n);
        p.axis_box = true;
        p.lo = lo.clone();
        p.hi = hi.clone();
        Ok(p)
    }

    fn assemble(vertices: Vec<DVector<f64>>, dim: usize) -> Self {
        let mut lo = vertices[0].clone();
        let mut hi = vertices[0].clone();
        for v in &vertices[1..] {
            for i in 0..dim {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        let axis_box = detect_axis_box(&vertices, &lo, &hi);
        Polytope {
            vertices,
            dim,
            lo,
            hi,
            axis_box,
        }
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn aabb(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lo, &self.hi)
    }

    pub fn is_axis_box(&self) -> bool {
        self.axis_box
    }

    /// Max pairwise vertex distance; for a polytope this is the exact set
    /// diameter.
    pub fn diameter(&self) -> f64 {
        if self.axis_box {
            return (&self.hi - &self.lo).norm();
        }
        let mut best: f64 = 0.0;
        for i in 0..self.vertices.len() {
            for j in (i + 1)..self.vertices.len() {
                best = best.max((&self.vertices[i] - &self.vertices[j]).norm());
            }
        }
        best
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        dist_to_polytope(x, self) <= EPS_MEMBERSHIP
    }

    /// Image under x -> T x + d. Affine maps carry extreme points to a
    /// superset of the image's extreme points, so the result is re-pruned.
    pub fn affine_image(
        &self,
        t: &DMatrix<f64>,
        d: &DVector<f64>,
    ) -> Result<Polytope, GeometryError> {
        if t.ncols() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: t.ncols(),
            });
        }
        Polytope::new(self.vertices.iter().map(|v| t * v + d).collect())
    }
}

fn detect_axis_box(vertices: &[DVector<f64>], lo: &DVector<f64>, hi: &DVector<f64>) -> bool {
    let n = lo.len();
    if n > 20 {
        return false;
    }
    let degenerate = (0..n).filter(|&i| lo[i] == hi[i]).count();
    let expect = 1usize << (n - degenerate);
    if vertices.len() != expect {
        return false;
    }
    vertices
        .iter()
        .all(|v| (0..n).all(|i| v[i] == lo[i] || v[i] == hi[i]))
}

/// Prunes points that lie in the convex hull of the remaining ones
/// (general-dimension path; n = 2 uses the exact planar hull instead).
fn prune_extreme(points: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for p in points {
        if !kept
            .iter()
            .any(|q| (q - &p).norm() <= 1e-12 * (1.0 + p.norm()))
        {
            kept.push(p);
        }
    }
    let mut i = 0;
    while i < kept.len() && kept.len() > 1 {
        let others: Vec<DVector<f64>> = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v.clone())
            .collect();
        let scale = 1.0 + kept[i].norm();
        if dist_to_hull_general(&kept[i], &others) <= 1e-10 * scale {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept
}

/// Distance from a point to the convex hull of the given vertices.
pub fn dist_to_polytope(x: &DVector<f64>, p: &Polytope) -> f64 {
    assert_eq!(x.len(), p.dim(), "polytope distance: dimension mismatch");
    if p.axis_box {
        let mut acc = 0.0;
        for i in 0..p.dim {
            let d = (p.lo[i] - x[i]).max(x[i] - p.hi[i]).max(0.0);
            acc += d * d;
        }
        return acc.sqrt();
    }
    match p.dim {
        1 => {
            let lo = p.lo[0];
            let hi = p.hi[0];
            (lo - x[0]).max(x[0] - hi).max(0.0)
        }
        2 => {
            let hull: Vec<(f64, f64)> = p.vertices.iter().map(|v| (v[0], v[1])).collect();
            hull2::dist_point_hull((x[0], x[1]), &hull)
        }
        _ => dist_to_hull_general(x, &p.vertices),
    }
}

/// Pairwise Frank-Wolfe projection onto a convex hull: minimizes
/// 0.5 * ||y - x||^2 over convex weights on the vertices. Converges linearly
/// on polytopes; the duality gap bounds the objective error, so the loop exits
/// with a certified tolerance.
pub(crate) fn dist_to_hull_general(x: &DVector<f64>, verts: &[DVector<f64>]) -> f64 {
    debug_assert!(!verts.is_empty());
    if verts.len() == 1 {
        return (x - &verts[0]).norm();
    }
    let mut start = 0;
    let mut best = f64::INFINITY;
    for (i, v) in verts.iter().enumerate() {
        let d = (v - x).norm_squared();
        if d < best {
            best = d;
            start = i;
        }
    }
    let mut w = vec![0.0f64; verts.len()];
    w[start] = 1.0;
    let mut y = verts[start].clone();
    let scale = 1.0 + x.norm() + verts.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = 1e-13 * scale * scale;

    for iter in 0..20_000usize {
        let g = &y - x;
        let mut s_idx = 0;
        let mut s_val = f64::INFINITY;
        let mut a_idx = 0;
        let mut a_val = f64::NEG_INFINITY;
        for (i, v) in verts.iter().enumerate() {
            let gv = g.dot(v);
            if gv < s_val {
                s_val = gv;
                s_idx = i;
            }
            if w[i] > 0.0 && gv > a_val {
                a_val = gv;
                a_idx = i;
            }
        }
        let gap = g.dot(&y) - s_val;
        if gap <= tol {
            break;
        }
        let d = &verts[s_idx] - &verts[a_idx];
        let dn2 = d.norm_squared();
        if dn2 == 0.0 {
            break;
        }
        let t = (-g.dot(&d) / dn2).clamp(0.0, w[a_idx]);
        if t == 0.0 {
            break;
        }
        w[s_idx] += t;
        w[a_idx] -= t;
        y += d * t;
        // Periodically rebuild y from the weights to stop drift.
        if iter % 512 == 511 {
            y = DVector::zeros(x.len());
            for (i, v) in verts.iter().enumerate() {
                if w[i] > 0.0 {
                    y += v * w[i];
                }
            }
        }
    }
    (y - x).norm()
}

/// Exact maximum of dist(., P) over a box; the distance is convex, so the
/// maximum sits on a corner.
pub(crate) fn max_dist_over_box(lo: &DVector<f64>, hi: &DVector<f64>, p: &Polytope) -> f64 {
    let n = lo.len();
    assert!(n <= 26, "corner enumeration limited to small dimensions");
    let mut best = f64::NEG_INFINITY;
    let mut corner = DVector::zeros(n);
    for mask in 0u64..(1u64 << n) {
        for i in 0..n {
            corner[i] = if mask >> i & 1 == 1 { hi[i] } else { lo[i] };
        }
        best = best.max(dist_to_polytope(&corner, p));
    }
    best
}

/// Largest pairwise distance in a point cloud (0 for fewer than two points).
pub fn cloud_diameter(points: &[DVector<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let dim = points[0].len();
    if dim == 2 {
        let candidates = row_extremes_2d(points);
        let hull = hull2::convex_hull(&candidates);
        hull2::hull_diameter(&hull)
    } else {
        let mut best: f64 = 0.0;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                best = best.max((&points[i] - &points[j]).norm());
            }
        }
        best
    }
}

/// Per-run x extremes of a planar cloud, where a run is a maximal stretch of
/// consecutive points sharing a y value. Any extreme point of the cloud is
/// the min-x or max-x of its run (otherwise two same-y points sandwich it),
/// so the hull of these candidates has the same diameter as the full cloud.
/// Grid-seeded clouds keep equal-y points consecutive through filtering,
/// collapsing the candidate count to twice the row count; arbitrary point
/// orders just degrade to one run per point.
fn row_extremes_2d(points: &[DVector<f64>]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let y = points[i][1];
        let mut min_x = points[i][0];
        let mut max_x = min_x;
        let mut j = i + 1;
        while j < points.len() && points[j][1] == y {
            min_x = min_x.min(points[j][0]);
            max_x = max_x.max(points[j][0]);
            j += 1;
        }
        out.push((min_x, y));
        if max_x > min_x {
            out.push((max_x, y));
        }
        i = j;
    }
    out
}

/// Jung's covering radius sqrt(n / (2(n+1))) * diameter: any set with the
/// given diameter in R^n fits in a ball of this radius.
pub fn jung_radius(diameter: f64, n: usize) -> Result<f64, GeometryError> {
    if n == 0 {
        return Err(GeometryError::ZeroDimension);
    }
    if !diameter.is_finite() || diameter < 0.0 {
        return Err(GeometryError::NegativeDiameter);
    }
    let nf = n as f64;
    Ok(diameter * (nf / (2.0 * (nf + 1.0))).sqrt())
}

/// Convex set stored as a constraint list (base polytope intersected with
/// ellipsoids and ball-bloated polytopes) plus a finite sample cloud.
///
/// Invariant: every cloud point satisfies every stored constraint, so cloud
/// edits are monotone (points are only ever removed by filtering).
#[derive(Debug, Clone)]
pub struct EstimateSet {
    base: Polytope,
    ellipsoids: Vec<Ellipsoid>,
    bloated: Vec<(Polytope, f64)>,
    cloud: Vec<DVector<f64>>,
    // Running intersection of the constraint bounding boxes; an outer box for
    // the represented set, used for enclosure propagation and resampling.
    lo: DVector<f64>,
    hi: DVector<f64>,
    cloud_box: Option<(DVector<f64>, DVector<f64>)>,
}

impl EstimateSet {
    pub fn new(base: Polytope) -> Self {
        let (lo, hi) = (base.aabb().0.clone(), base.aabb().1.clone());
        EstimateSet {
            base,
            ellipsoids: Vec::new(),
            bloated: Vec::new(),
            cloud: Vec::new(),
            lo,
            hi,
            cloud_box: None,
        }
    }

    /// Seeds the cloud with a uniform grid of `resolution` points per axis
    /// over the base bounding box, keeping the points inside the base.
    pub fn with_grid_cloud(base: Polytope, resolution: usize) -> Result<Self, GeometryError> {
        let n = base.dim();
        let r = resolution.max(2);
        let total = r.checked_pow(n as u32).unwrap_or(usize::MAX);
        if total > 40_000_000 {
            return Err(GeometryError::GridTooLarge { requested: total });
        }
        let mut set = EstimateSet::new(base);
        let (lo, hi) = (set.lo.clone(), set.hi.clone());
        let mut idx = vec![0usize; n];
        let mut cloud = Vec::with_capacity(total);
        loop {
            let p = DVector::from_fn(n, |i, _| {
                lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (r - 1) as f64
            });
            if set.base.is_axis_box() || set.base.contains(&p) {
                cloud.push(p);
            }
            let mut axis = 0;
            loop {
                if axis == n {
                    set.cloud = cloud;
                    set.cloud_box = None;
                    return Ok(set);
                }
                idx[axis] += 1;
                if idx[axis] < r {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }

    pub(crate) fn from_parts(
        base: Polytope,
        ellipsoids: Vec<Ellipsoid>,
        bloated: Vec<(Polytope, f64)>,
        cloud: Vec<DVector<f64>>,
    ) -> Self {
        let mut set = EstimateSet::new(base);
        for e in ellipsoids {
            let (elo, ehi) = e.aabb();
            set.tighten_box(&elo, &ehi);
            set.ellipsoids.push(e);
        }
        for (p, r) in bloated {
            let (plo, phi) = p.aabb();
            let rlo = plo.map(|x| x - r);
            let rhi = phi.map(|x| x + r);
            set.tighten_box(&rlo, &rhi);
            set.bloated.push((p, r));
        }
        set.cloud = cloud;
        set.cloud_box = None;
        set
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &Polytope {
        &self.base
    }

    pub fn ellipsoids(&self) -> &[Ellipsoid] {
        &self.ellipsoids
    }

    pub fn bloated(&self) -> &[(Polytope, f64)] {
        &self.bloated
    }

    pub fn cloud(&self) -> &[DVector<f64>] {
        &self.cloud
    }

    pub fn cloud_len(&self) -> usize {
        self.cloud.len()
    }

    pub fn cloud_diameter(&self) -> f64 {
        cloud_diameter(&self.cloud)
    }

    /// Outer axis-aligned box for the represented set (intersection of all
    /// constraint boxes).
    pub fn constraint_aabb(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lo, &self.hi)
    }

    /// True iff x satisfies every stored constraint.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        if !self.base.contains(x) {
            return false;
        }
        if !self.ellipsoids.iter().all(|e| e.contains(x)) {
            return false;
        }
        self.bloated
            .iter()
            .all(|(p, r)| dist_to_polytope(x, p) <= r + EPS_MEMBERSHIP)
    }

    fn tighten_box(&mut self, lo: &DVector<f64>, hi: &DVector<f64>) {
        for i in 0..self.lo.len() {
            self.lo[i] = self.lo[i].max(lo[i]);
            self.hi[i] = self.hi[i].min(hi[i]);
            // Constraints around a common true point can only overlap;
            // numerically inverted boxes collapse to their midpoint.
            if self.lo[i] > self.hi[i] {
                let mid = 0.5 * (self.lo[i] + self.hi[i]);
                self.lo[i] = mid;
                self.hi[i] = mid;
            }
        }
    }

    fn cloud_bounds(&mut self) -> Option<(DVector<f64>, DVector<f64>)> {
        if self.cloud.is_empty() {
            return None;
        }
        if self.cloud_box.is_none() {
            let mut lo = self.cloud[0].clone();
            let mut hi = self.cloud[0].clone();
            for p in &self.cloud[1..] {
                for i in 0..lo.len() {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
            self.cloud_box = Some((lo, hi));
        }
        self.cloud_box.clone()
    }

    /// Adds an ellipsoid constraint and filters the cloud through it.
    /// Returns the number of removed cloud points. If the whole cloud
    /// bounding box sits inside the ellipsoid the per-point scan is skipped
    /// (the result is identical, the scan cannot remove anything).
    pub fn add_ellipsoid(&mut self, e: Ellipsoid) -> usize {
        assert_eq!(
            e.dim(),
            self.dim(),
            "ellipsoid constraint: dimension mismatch"
        );
        let mut removed = 0;
        if let Some((clo, chi)) = self.cloud_bounds() {
            if e.max_quad_over_box(&clo, &chi) > 1.0 + EPS_MEMBERSHIP {
                let before = self.cloud.len();
                self.cloud.retain(|p| e.contains(p));
                removed = before - self.cloud.len();
                if removed > 0 {
                    self.cloud_box = None;
                }
            }
        }
        let (elo, ehi) = e.aabb();
        self.tighten_box(&elo, &ehi);
        self.ellipsoids.push(e);
        removed
    }

    /// Adds a batch of ellipsoid constraints, filtering the cloud in a single
    /// pass against the ones whose corner test says they can cut it. The
    /// surviving cloud is the same as from one `add_ellipsoid` per constraint;
    /// the batch just avoids rescanning the cloud once per constraint.
    pub fn add_ellipsoids(&mut self, batch: Vec<Ellipsoid>) -> usize {
        for e in &batch {
            assert_eq!(
                e.dim(),
                self.dim(),
                "ellipsoid constraint: dimension mismatch"
            );
        }
        let mut removed = 0;
        if let Some((clo, chi)) = self.cloud_bounds() {
            let firing: Vec<&Ellipsoid> = batch
                .iter()
                .filter(|e| e.max_quad_over_box(&clo, &chi) > 1.0 + EPS_MEMBERSHIP)
                .collect();
            if !firing.is_empty() {
                let before = self.cloud.len();
                let n = self.base.dim();
                let mut lo = DVector::from_element(n, f64::INFINITY);
                let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
                if n == 2 {
                    // The retain below runs once per cloud point per firing
                    // constraint; plain f64 copies beat matrix indexing there.
                    struct Quad2 {
                        mu0: f64,
                        mu1: f64,
                        p00: f64,
                        p01: f64,
                        p11: f64,
                    }
                    let flat: Vec<Quad2> = firing
                        .iter()
                        .map(|e| Quad2 {
                            mu0: e.mu()[0],
                            mu1: e.mu()[1],
                            p00: e.p()[(0, 0)],
                            p01: e.p()[(0, 1)],
                            p11: e.p()[(1, 1)],
                        })
                        .collect();
                    let limit = 1.0 + EPS_MEMBERSHIP;
                    self.cloud.retain(|p| {
                        let (x0, x1) = (p[0], p[1]);
                        let keep = flat.iter().all(|q| {
                            let d0 = x0 - q.mu0;
                            let d1 = x1 - q.mu1;
                            q.p00 * d0 * d0 + 2.0 * q.p01 * d0 * d1 + q.p11 * d1 * d1 <= limit
                        });
                        if keep {
                            lo[0] = lo[0].min(x0);
                            hi[0] = hi[0].max(x0);
                            lo[1] = lo[1].min(x1);
                            hi[1] = hi[1].max(x1);
                        }
                        keep
                    });
                } else {
                    self.cloud.retain(|p| {
                        let keep = firing.iter().all(|e| e.contains(p));
                        if keep {
                            for i in 0..n {
                                lo[i] = lo[i].min(p[i]);
                                hi[i] = hi[i].max(p[i]);
                            }
                        }
                        keep
                    });
                }
                removed = before - self.cloud.len();
                if removed > 0 {
                    // Bounds of the survivors were tracked in the same pass.
                    self.cloud_box = if self.cloud.is_empty() {
                        None
                    } else {
                        Some((lo, hi))
                    };
                }
            }
        }
        for e in batch {
            let (elo, ehi) = e.aabb();
            self.tighten_box(&elo, &ehi);
            self.ellipsoids.push(e);
        }
        removed
    }

    /// Adds a ball-bloated polytope constraint (membership is
    /// dist(x, p) <= r) and filters the cloud, with the same corner skip as
    /// `add_ellipsoid`.
    pub fn add_bloated(&mut self, p: Polytope, r: f64) -> usize {
        assert_eq!(
            p.dim(),
            self.dim(),
            "bloated constraint: dimension mismatch"
        );
        let removed = self.filter_cloud_by_bloat(&p, r);
        let (plo, phi) = p.aabb();
        let rlo = plo.map(|x| x - r);
        let rhi = phi.map(|x| x + r);
        self.tighten_box(&rlo, &rhi);
        self.bloated.push((p, r));
        removed
    }

    /// Replaces a bloated constraint with a tighter version and re-filters the
    /// cloud against the replacement.
    pub fn replace_bloated(&mut self, idx: usize, p: Polytope, r: f64) -> usize {
        assert!(idx < self.bloated.len());
        assert_eq!(
            p.dim(),
            self.dim(),
            "bloated constraint: dimension mismatch"
        );
        let removed = self.filter_cloud_by_bloat(&p, r);
        let (plo, phi) = p.aabb();
        let rlo = plo.map(|x| x - r);
        let rhi = phi.map(|x| x + r);
        self.tighten_box(&rlo, &rhi);
        self.bloated[idx] = (p, r);
        removed
    }

    fn filter_cloud_by_bloat(&mut self, p: &Polytope, r: f64) -> usize {
        let mut removed = 0;
        if let Some((clo, chi)) = self.cloud_bounds() {
            if max_dist_over_box(&clo, &chi, p) > r + EPS_MEMBERSHIP {
                let before = self.cloud.len();
                self.cloud
                    .retain(|q| dist_to_polytope(q, p) <= r + EPS_MEMBERSHIP);
                removed = before - self.cloud.len();
                if removed > 0 {
                    self.cloud_box = None;
                }
            }
        }
        removed
    }

    /// Drops an ellipsoid from the constraint store (the cloud is untouched;
    /// it was already filtered through the constraint, so the invariant
    /// holds). Used to cap the stored-constraint count.
    pub fn remove_ellipsoid(&mut self, idx: usize) -> Ellipsoid {
        self.ellipsoids.remove(idx)
    }

    /// Draws fresh cloud points by rejection sampling inside the constraint
    /// bounding box (falling back to the tightest ellipsoid as the proposal
    /// when the box accepts nothing). Appends up to `target` accepted points
    /// and returns how many were added.
    pub fn resample_cloud<R: Rng>(&mut self, target: usize, rng: &mut R) -> usize {
        let n = self.dim();
        let mut added = 0;
        let budget = 400 * target.max(1);
        for _ in 0..budget {
            if added >= target {
                break;
            }
            let p = DVector::from_fn(n, |i, _| {
                if self.hi[i] > self.lo[i] {
                    rng.gen_range(self.lo[i]..=self.hi[i])
                } else {
                    self.lo[i]
                }
            });
            if self.contains(&p) {
                self.cloud.push(p);
                added += 1;
            }
        }
        if added == 0 {
            if let Some(tightest) = self
                .ellipsoids
                .iter()
                .min_by(|a, b| a.diameter().total_cmp(&b.diameter()))
                .cloned()
            {
                let eig = tightest.p().clone().symmetric_eigen();
                for _ in 0..budget {
                    if added >= target {
                        break;
                    }
                    // Uniform in the ellipsoid: scaled direction inside the
                    // unit ball mapped through the inverse square root of P.
                    let z = DVector::from_fn(n, |_, _| {
                        let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
                        u
                    });
                    let norm = z.norm();
                    if norm == 0.0 {
                        continue;
                    }
                    let radius: f64 = rng.gen::<f64>().powf(1.0 / n as f64);
                    let unit = z * (radius / norm);
                    let mut p = tightest.mu().clone();
                    for j in 0..n {
                        let axis = eig.eigenvectors.column(j) / eig.eigenvalues[j].sqrt();
                        p += axis * unit[j];
                    }
                    if self.contains(&p) {
                        self.cloud.push(p);
                        added += 1;
                    }
                }
            }
        }
        if added > 0 {
            self.cloud_box = None;
        }
        added
    }
}

/// Membership oracle over every stored constraint of an estimate set.
pub fn estimate_membership(s: &EstimateSet, x: &DVector<f64>) -> bool {
    s.contains(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn ellipsoid_membership_examples() {
        let e = Ellipsoid::new(DVector::zeros(2), eye(2)).unwrap();
        assert!(e.contains(&DVector::zeros(2)));
        assert!(e.contains(&v2(1.0, 0.0)), "boundary point is inside");
        let wide = Ellipsoid::new(DVector::zeros(2), eye(2) / 16.0).unwrap();
        assert!(!wide.contains(&v2(5.0, 0.0)), "5 > semi-axis 4");
        assert!(wide.contains(&v2(4.0, 0.0)));
    }

    #[test]
    fn ellipsoid_rejects_bad_shapes() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert_eq!(
            Ellipsoid::new(DVector::zeros(2), asym).unwrap_err(),
            GeometryError::NotSymmetric
        );
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(
            Ellipsoid::new(DVector::zeros(2), indef).unwrap_err(),
            GeometryError::NotPositiveDefinite
        );
    }

    #[test]
    fn ellipsoid_membership_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = 2 + (rng.gen::<u32>() % 3) as usize;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let p = &a * a.transpose() + eye(n) * 0.1;
            let mu = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let t = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let x = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
            let e = Ellipsoid::new(mu.clone(), p.clone()).unwrap();
            let shifted = Ellipsoid::new(&mu + &t, p).unwrap();
            assert_eq!(e.contains(&x), shifted.contains(&(&x + &t)));
        }
    }

    #[test]
    fn ellipsoid_diameter_and_aabb() {
        // Semi-axes 4 and 2: P = diag(1/16, 1/4).
        let p = DMatrix::from_row_slice(2, 2, &[1.0 / 16.0, 0.0, 0.0, 0.25]);
        let e = Ellipsoid::new(v2(1.0, -1.0), p).unwrap();
        assert!((e.diameter() - 8.0).abs() < 1e-12);
        let (lo, hi) = e.aabb();
        assert!((lo[0] - (1.0 - 4.0)).abs() < 1e-12 && (hi[0] - 5.0).abs() < 1e-12);
        assert!((lo[1] - (-3.0)).abs() < 1e-12 && (hi[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_quad_over_box_is_corner_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let p = &a * a.transpose() + eye(2) * 0.05;
            let e = Ellipsoid::new(v2(0.3, -0.2), p).unwrap();
            let lo = v2(rng.gen_range(-2.0..0.0), rng.gen_range(-2.0..0.0));
            let hi = v2(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let bound = e.max_quad_over_box(&lo, &hi);
            for _ in 0..200 {
                let x = v2(rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1]));
                assert!(e.quad(&x) <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn polytope_prunes_to_extreme_points() {
        let square = Polytope::new(vec![
            v2(0.0, 0.0),
            v2(1.0, 0.0),
            v2(1.0, 1.0),
            v2(0.0, 1.0),
            v2(0.5, 0.5),
            v2(0.25, 0.0),
        ])
        .unwrap();
        assert_eq!(square.vertices().len(), 4);
        assert!(square.is_axis_box());

        let cube_pts: Vec<DVector<f64>> = (0..8)
            .map(|m| DVector::from_fn(3, |i, _| if m >> i & 1 == 1 { 1.0 } else { 0.0 }))
            .chain(std::iter::once(DVector::from_vec(vec![0.5, 0.5, 0.5])))
            .collect();
        let cube = Polytope::new(cube_pts).unwrap();
        assert_eq!(cube.vertices().len(), 8);
        assert!(cube.is_axis_box());
    }

    #[test]
    fn polytope_distance_examples() {
        let vertex = Polytope::new(vec![v2(1.0, 1.0)]).unwrap();
        assert_eq!(dist_to_polytope(&v2(1.0, 1.0), &vertex), 0.0);

        let seg = Polytope::new(vec![v2(0.0, 0.0), v2(1.0, 0.0)]).unwrap();
        assert!((dist_to_polytope(&v2(0.5, 2.0), &seg) - 2.0).abs() < 1e-12);

        let square = Polytope::from_box(&v2(0.0, 0.0), &v2(1.0, 1.0)).unwrap();
        assert!((dist_to_polytope(&v2(2.0, 2.0), &square) - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(dist_to_polytope(&v2(0.5, 0.5), &square), 0.0);
    }

    #[test]
    fn empty_vertex_set_is_rejected() {
        assert_eq!(
            Polytope::new(vec![]).unwrap_err(),
            GeometryError::EmptyVertexSet
        );
    }

    #[test]
    fn distance_zero_on_random_convex_combinations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dim in [2usize, 3, 4] {
            for _ in 0..40 {
                let verts: Vec<DVector<f64>> = (0..(dim + 3))
                    .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0)))
                    .collect();
                let p = Polytope::new(verts.clone()).unwrap();
                let mut weights: Vec<f64> = (0..verts.len()).map(|_| rng.gen::<f64>()).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                let mut x = DVector::zeros(dim);
                for (w, v) in weights.iter().zip(&verts) {
                    x += v * *w;
                }
                assert!(
                    dist_to_polytope(&x, &p) <= 1e-7,
                    "hull point at positive distance (dim {dim})"
                );
            }
        }
    }

    #[test]
    fn general_distance_matches_box_formula_in_3d() {
        // Forces the Frank-Wolfe path on cube vertices and compares against
        // the exact axis-aligned clamp distance.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let corners: Vec<DVector<f64>> = (0..8)
            .map(|m| DVector::from_fn(3, |i, _| if m >> i & 1 == 1 { 1.0 } else { -1.0 }))
            .collect();
        for _ in 0..300 {
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-4.0..4.0));
            let exact: f64 = (0..3)
                .map(|i| (-1.0f64 - x[i]).max(x[i] - 1.0).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            let fw = dist_to_hull_general(&x, &corners);
            assert!(
                (fw - exact).abs() <= 1e-7 * (1.0 + exact),
                "fw {fw} vs exact {exact}"
            );
        }
    }

    #[test]
    fn cloud_diameter_examples() {
        assert_eq!(cloud_diameter(&[v2(1.0, 2.0)]), 0.0);
        assert_eq!(cloud_diameter(&[v2(0.0, 0.0), v2(3.0, 4.0)]), 5.0);
        let square = vec![v2(0.0, 0.0), v2(1.0, 0.0), v2(1.0, 1.0), v2(0.0, 1.0)];
        assert!((cloud_diameter(&square) - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn planar_diameter_matches_pairwise_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.gen_range(2..200);
            let pts: Vec<DVector<f64>> = (0..n)
                .map(|_| v2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let mut brute: f64 = 0.0;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    brute = brute.max((&pts[i] - &pts[j]).norm());
                }
            }
            assert!((cloud_diameter(&pts) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn jung_radius_values() {
        assert_eq!(jung_radius(0.0, 2).unwrap(), 0.0);
        assert!((jung_radius(1.0, 2).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((jung_radius(2.0, 3).unwrap() - 2.0 * (3.0f64 / 8.0).sqrt()).abs() < 1e-15);
        assert!(jung_radius(-1.0, 2).is_err());
    }

    #[test]
    fn jung_dominates_enclosing_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let pts: Vec<DVector<f64>> = (0..rng.gen_range(2..30))
                .map(|_| v2(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
                .collect();
            let ball = min_enclosing_ball(&pts).unwrap();
            let jung = jung_radius(cloud_diameter(&pts), 2).unwrap();
            assert!(ball.radius <= jung + 1e-9);
        }
    }

    #[test]
    fn estimate_membership_examples() {
        let base = Polytope::from_box(&v2(0.0, 0.0), &v2(1.0, 1.0)).unwrap();
        let mut s = EstimateSet::new(base);
        assert!(estimate_membership(&s, &v2(0.5, 0.5)));
        assert!(!estimate_membership(&s, &v2(1.5, 0.5)));

        // A tight ellipsoid around (0,0) excludes (0.5, 0.5).
        let tight = Ellipsoid::new(DVector::zeros(2), eye(2) * 100.0).unwrap();
        s.add_ellipsoid(tight);
        assert!(!estimate_membership(&s, &v2(0.5, 0.5)));
        assert!(estimate_membership(&s, &v2(0.05, 0.05)));

        // Bloated pair: dist to the box must be within the radius.
        let base2 = Polytope::from_box(&v2(-5.0, -5.0), &v2(5.0, 5.0)).unwrap();
        let mut s2 = EstimateSet::new(base2);
        let inner = Polytope::from_box(&v2(0.0, 0.0), &v2(1.0, 1.0)).unwrap();
        s2.add_bloated(inner, 1.0);
        assert!(estimate_membership(&s2, &v2(2.0, 0.5)));
        assert!(!estimate_membership(&s2, &v2(2.1, 0.5)));
    }

    #[test]
    fn membership_monotone_under_new_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let base = Polytope::from_box(&v2(-2.0, -2.0), &v2(2.0, 2.0)).unwrap();
            let mut s = EstimateSet::new(base);
            let x = v2(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let mut prev = s.contains(&x);
            for _ in 0..5 {
                let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
                let p = &a * a.transpose() + eye(2) * rng.gen_range(0.05..0.5);
                let mu = v2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                s.add_ellipsoid(Ellipsoid::new(mu, p).unwrap());
                let now = s.contains(&x);
                assert!(!(now && !prev), "membership flipped false -> true");
                prev = now;
            }
        }
    }

    #[test]
    fn grid_cloud_counts_and_containment() {
        let base = Polytope::from_box(&v2(-1.0, -1.0), &v2(1.0, 1.0)).unwrap();
        let s = EstimateSet::with_grid_cloud(base, 21).unwrap();
        assert_eq!(s.cloud_len(), 21 * 21);
        assert!(s.cloud().iter().all(|p| s.contains(p)));
        assert!((s.cloud_diameter() - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn corner_skip_filtering_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let base = Polytope::from_box(&v2(-2.0, -2.0), &v2(2.0, 2.0)).unwrap();
            let mut fast = EstimateSet::with_grid_cloud(base.clone(), 41).unwrap();
            let mut slow: Vec<DVector<f64>> = fast.cloud().to_vec();
            for _ in 0..6 {
                let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
                let p = &a * a.transpose() + eye(2) * rng.gen_range(0.02..1.0);
                let mu = v2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let e = Ellipsoid::new(mu, p).unwrap();
                slow.retain(|q| e.contains(q));
                fast.add_ellipsoid(e);
                assert_eq!(fast.cloud(), slow.as_slice(), "skip path changed semantics");
            }
        }
    }

    #[test]
    fn resample_refills_from_constraints() {
        let base = Polytope::from_box(&v2(-2.0, -2.0), &v2(2.0, 2.0)).unwrap();
        let mut s = EstimateSet::with_grid_cloud(base, 11).unwrap();
        // Constraint far tighter than the grid step empties the cloud.
        let tiny = Ellipsoid::new(v2(0.151, 0.149), eye(2) * 1e6).unwrap();
        s.add_ellipsoid(tiny);
        assert_eq!(s.cloud_len(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let added = s.resample_cloud(128, &mut rng);
        assert!(added > 0, "resampling found no points in a nonempty set");
        assert!(s.cloud().iter().all(|p| s.contains(p)));
    }
}
