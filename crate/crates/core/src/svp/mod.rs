//! Spherical Voronoi partitions built from caps of a common opening angle.
//!
//! An alpha-partition basis is a set of unit vectors p_1..p_N whose caps
//! C(p_i, alpha) = { w on the sphere : <p_i, w> > alpha } jointly cover the
//! sphere; each direction is assigned to the best-aligned basis vector. The
//! partition quality is certified through the per-cell minimum alignment
//! m_i = min over cell i of <p_i, w>, which must reach alpha (caps are taken
//! closed at the boundary, absorbed into a 1e-9 slack).

mod hull3;
mod vecopt;

use nalgebra::DVector;
use std::fmt;

pub(crate) use vecopt::random_unit;

/// Slack for coverage certification: a cell passes when m_i >= alpha - EPS_COVER.
pub const EPS_COVER: f64 = 1e-9;

/// Default ceiling for the basis-size search.
pub const DEFAULT_MAX_BASIS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum SvpError {
    InvalidAlpha(f64),
    InvalidDimension(usize),
    TooFewVectors(usize),
    NotUnit(usize),
    DuplicateVectors(usize, usize),
    IndexOutOfRange { index: usize, len: usize },
    DegenerateCell(usize),
    CoverageCapExceeded { alpha: f64, cap: usize },
}

impl fmt::Display for SvpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvpError::InvalidAlpha(a) => write!(f, "alpha must lie in [-1, 1), got {a}"),
            SvpError::InvalidDimension(n) => write!(f, "sphere dimension must be >= 2, got {n}"),
            SvpError::TooFewVectors(n) => write!(f, "need at least 2 vectors, got {n}"),
            SvpError::NotUnit(i) => write!(f, "vector {i} is not unit length"),
            SvpError::DuplicateVectors(i, j) => write!(f, "vectors {i} and {j} coincide"),
            SvpError::IndexOutOfRange { index, len } => {
                write!(f, "cell index {index} out of range for {len} vectors")
            }
            SvpError::DegenerateCell(i) => {
                write!(f, "cell {i} is empty (vector dominated by the others)")
            }
            SvpError::CoverageCapExceeded { alpha, cap } => {
                write!(
                    f,
                    "no covering basis of at most {cap} vectors found for alpha = {alpha}"
                )
            }
        }
    }
}

impl std::error::Error for SvpError {}

/// How a reported cell minimum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// Enumerated at Voronoi cell vertices (exact up to floating point).
    Exact,
    /// Monte-Carlo lower-resolution estimate over sampled directions.
    Sampled,
}

/// Nonempty set of pairwise-distinct unit vectors in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVectorSet {
    vectors: Vec<DVector<f64>>,
    dim: usize,
}

impl UnitVectorSet {
    pub fn new(vectors: Vec<DVector<f64>>) -> Result<Self, SvpError> {
        let first = vectors.first().ok_or(SvpError::TooFewVectors(0))?;
        let dim = first.len();
        if dim < 2 {
            return Err(SvpError::InvalidDimension(dim));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(SvpError::InvalidDimension(v.len()));
            }
            if (v.norm() - 1.0).abs() > 1e-12 {
                return Err(SvpError::NotUnit(i));
            }
        }
        for i in 0..vectors.len() {
            for j in (i + 1)..vectors.len() {
                if vectors[i].dot(&vectors[j]) >= 1.0 - 1e-9 {
                    return Err(SvpError::DuplicateVectors(i, j));
                }
            }
        }
        Ok(UnitVectorSet { vectors, dim })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }
}

/// Spreads `count` unit vectors in R^dim to minimize the maximum pairwise
/// inner product.
///
/// Exact closed forms: two vectors are antipodal in any dimension, and in the
/// plane the optimum is evenly spaced angles with gamma = cos(2 pi / count).
/// Higher dimensions run an annealed smoothed-minimax descent, deterministic
/// in (count, dim, seed).
pub fn vec_opt(count: usize, dim: usize, seed: u64) -> Result<UnitVectorSet, SvpError> {
    if dim < 2 {
        return Err(SvpError::InvalidDimension(dim));
    }
    if count < 2 {
        return Err(SvpError::TooFewVectors(count));
    }
    let vectors = if count == 2 {
        let mut a = DVector::zeros(dim);
        a[0] = 1.0;
        let mut b = DVector::zeros(dim);
        b[0] = -1.0;
        vec![a, b]
    } else if dim == 2 {
        (0..count)
            .map(|i| {
                let theta = std::f64::consts::TAU * i as f64 / count as f64;
                DVector::from_vec(vec![theta.cos(), theta.sin()])
            })
            .collect()
    } else {
        vecopt::optimize(count, dim, seed)
            .into_iter()
            .map(|v| {
                let n = v.norm();
                v / n
            })
            .collect()
    };
    UnitVectorSet::new(vectors)
}

/// Largest pairwise inner product eta = max_{i != j} <p_i, p_j>.
pub fn max_alignment(v: &UnitVectorSet) -> Result<f64, SvpError> {
    if v.len() < 2 {
        return Err(SvpError::TooFewVectors(v.len()));
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            best = best.max(v.vectors[i].dot(&v.vectors[j]));
        }
    }
    Ok(best)
}

/// Index of the cell containing direction w: the best-aligned basis vector,
/// lowest index on ties.
pub fn cell_of(v: &UnitVectorSet, w: &DVector<f64>) -> usize {
    assert_eq!(w.len(), v.dim(), "cell lookup: dimension mismatch");
    let mut best = 0;
    let mut best_val = v.vectors[0].dot(w);
    for (i, p) in v.vectors.iter().enumerate().skip(1) {
        let val = p.dot(w);
        if val > best_val {
            best_val = val;
            best = i;
        }
    }
    best
}

/// Worst alignment m_i = min over cell i of <p_i, w>.
///
/// Exact via cell-vertex enumeration for n in {2, 3}; for higher dimensions a
/// sampled estimate over at least 10^5 directions, flagged `Sampled`.
pub fn cell_min_alignment(v: &UnitVectorSet, i: usize) -> Result<(f64, Certificate), SvpError> {
    if i >= v.len() {
        return Err(SvpError::IndexOutOfRange {
            index: i,
            len: v.len(),
        });
    }
    let (mins, cert) = cell_alignments(v)?;
    Ok((mins[i], cert))
}

/// Per-cell minimum alignments for the whole basis in one pass.
pub fn cell_alignments(v: &UnitVectorSet) -> Result<(Vec<f64>, Certificate), SvpError> {
    match v.dim() {
        2 => Ok((cell_alignments_2d(v), Certificate::Exact)),
        3 => cell_alignments_3d(v).map(|m| (m, Certificate::Exact)),
        _ => cell_alignments_sampled(v).map(|m| (m, Certificate::Sampled)),
    }
}

/// Planar cells are arcs between the angular bisectors to the circular
/// neighbors; the minimum alignment is the cosine of the larger half-gap.
fn cell_alignments_2d(v: &UnitVectorSet) -> Vec<f64> {
    let n = v.len();
    if n == 1 {
        return vec![-1.0];
    }
    let mut order: Vec<(f64, usize)> = v
        .vectors
        .iter()
        .enumerate()
        .map(|(i, p)| (p[1].atan2(p[0]), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut mins = vec![0.0; n];
    for k in 0..n {
        let (theta, idx) = order[k];
        let prev = order[(k + n - 1) % n].0;
        let next = order[(k + 1) % n].0;
        let gap_prev = (theta - prev).rem_euclid(std::f64::consts::TAU);
        let gap_next = (next - theta).rem_euclid(std::f64::consts::TAU);
        mins[idx] = (gap_prev / 2.0).cos().min((gap_next / 2.0).cos());
    }
    mins
}

/// Spatial cells via convex-hull duality: the hull facets of sphere points
/// form the Delaunay triangulation, and their outward normals are the
/// Voronoi vertices; the cell minimum sits at a vertex.
fn cell_alignments_3d(v: &UnitVectorSet) -> Result<Vec<f64>, SvpError> {
    let pts: Vec<[f64; 3]> = v.vectors.iter().map(|p| [p[0], p[1], p[2]]).collect();
    let faces = hull3::convex_hull_faces(&pts).ok_or(SvpError::DegenerateCell(0))?;
    let mut mins = vec![f64::INFINITY; v.len()];
    for f in faces {
        let nrm = hull3::normalize(hull3::face_normal(&pts, f));
        for idx in f {
            let align = v.vectors[idx].dot(&DVector::from_column_slice(&nrm));
            mins[idx] = mins[idx].min(align);
        }
    }
    for (i, m) in mins.iter().enumerate() {
        if !m.is_finite() {
            return Err(SvpError::DegenerateCell(i));
        }
    }
    Ok(mins)
}

fn cell_alignments_sampled(v: &UnitVectorSet) -> Result<Vec<f64>, SvpError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5a3_c311);
    let samples = 100_000.max(2_000 * v.len());
    let mut mins = vec![f64::INFINITY; v.len()];
    for _ in 0..samples {
        let w = random_unit(&mut rng, v.dim());
        let cell = cell_of(v, &w);
        let align = v.vectors[cell].dot(&w);
        mins[cell] = mins[cell].min(align);
    }
    for (i, m) in mins.iter().enumerate() {
        if !m.is_finite() {
            return Err(SvpError::DegenerateCell(i));
        }
    }
    Ok(mins)
}

/// A certified alpha-partition of the unit sphere.
#[derive(Debug, Clone)]
pub struct Svp {
    basis: UnitVectorSet,
    alpha: f64,
    eta: f64,
    cell_mins: Vec<f64>,
    certificate: Certificate,
}

impl Svp {
    pub fn basis(&self) -> &UnitVectorSet {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest pairwise inner product of the basis.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cell_mins(&self) -> &[f64] {
        &self.cell_mins
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }
}

/// Searches for the smallest covering basis, growing the candidate count from
/// `n_start` (default dim + 1) until every cell minimum reaches
/// alpha - EPS_COVER, up to `DEFAULT_MAX_BASIS` vectors.
pub fn find_svp(
    alpha: f64,
    dim: usize,
    n_start: Option<usize>,
    seed: u64,
) -> Result<Svp, SvpError> {
    find_svp_with_cap(alpha, dim, n_start, seed, DEFAULT_MAX_BASIS)
}

pub fn find_svp_with_cap(
    alpha: f64,
    dim: usize,
    n_start: Option<usize>,
    seed: u64,
    cap: usize,
) -> Result<Svp, SvpError> {
    if dim < 2 {
        return Err(SvpError::InvalidDimension(dim));
    }
    if !alpha.is_finite() || !(-1.0..1.0).contains(&alpha) {
        return Err(SvpError::InvalidAlpha(alpha));
    }
    let start = n_start.unwrap_or(dim + 1).max(2);
    for count in start..=cap {
        let basis = vec_opt(count, dim, seed)?;
        // A dominated vector means the candidate layout cannot certify
        // coverage; a larger basis is tried instead of failing outright.
        let (mins, cert) = match cell_alignments(&basis) {
            Ok(res) => res,
            Err(SvpError::DegenerateCell(_)) => continue,
            Err(e) => return Err(e),
        };
        if mins.iter().all(|&m| m >= alpha - EPS_COVER) {
            let eta = max_alignment(&basis)?;
            return Ok(Svp {
                basis,
                alpha,
                eta,
                cell_mins: mins,
                certificate: cert,
            });
        }
    }
    Err(SvpError::CoverageCapExceeded { alpha, cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn unit2(theta: f64) -> DVector<f64> {
        DVector::from_vec(vec![theta.cos(), theta.sin()])
    }

    #[test]
    fn vec_opt_known_optima() {
        let pair = vec_opt(2, 3, 0).unwrap();
        assert!((max_alignment(&pair).unwrap() + 1.0).abs() < 1e-15);

        let hexagon = vec_opt(6, 2, 0).unwrap();
        assert!((max_alignment(&hexagon).unwrap() - 0.5).abs() < 1e-12);

        let heptagon = vec_opt(7, 2, 0).unwrap();
        let expected = (std::f64::consts::TAU / 7.0).cos();
        assert!((max_alignment(&heptagon).unwrap() - expected).abs() < 1e-12);

        let icosahedron = vec_opt(12, 3, 0).unwrap();
        let gamma = max_alignment(&icosahedron).unwrap();
        assert!((gamma - 1.0 / 5.0f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn vec_opt_is_deterministic() {
        let a = vec_opt(9, 3, 123).unwrap();
        let b = vec_opt(9, 3, 123).unwrap();
        assert_eq!(a.vectors(), b.vectors());
    }

    #[test]
    fn unit_vector_set_validation() {
        assert!(matches!(
            UnitVectorSet::new(vec![]),
            Err(SvpError::TooFewVectors(0))
        ));
        let not_unit = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            UnitVectorSet::new(vec![not_unit]),
            Err(SvpError::NotUnit(0))
        ));
        let dup = unit2(0.3);
        assert!(matches!(
            UnitVectorSet::new(vec![dup.clone(), dup]),
            Err(SvpError::DuplicateVectors(0, 1))
        ));
    }

    #[test]
    fn planar_cell_minimums() {
        let antipodal = vec_opt(2, 2, 0).unwrap();
        let (m, cert) = cell_min_alignment(&antipodal, 0).unwrap();
        assert!(m.abs() < 1e-15, "hemisphere cell bottoms out at 0");
        assert_eq!(cert, Certificate::Exact);

        let hexagon = vec_opt(6, 2, 0).unwrap();
        let (m, _) = cell_min_alignment(&hexagon, 2).unwrap();
        assert!((m - 3.0f64.sqrt() / 2.0).abs() < 1e-12);

        let square = vec_opt(4, 2, 0).unwrap();
        let (m, _) = cell_min_alignment(&square, 0).unwrap();
        assert!((m - 2.0f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn spatial_cell_minimums_match_tetrahedron_geometry() {
        // Regular simplex in R^3: each cell's vertices are the antipodes of
        // the other three basis vectors, all at alignment 1/3.
        let tetra = vec_opt(4, 3, 0).unwrap();
        for i in 0..4 {
            let (m, cert) = cell_min_alignment(&tetra, i).unwrap();
            assert!((m - 1.0 / 3.0).abs() < 1e-5, "cell {i} min {m}");
            assert_eq!(cert, Certificate::Exact);
        }
    }

    #[test]
    fn sampled_certificate_in_higher_dimensions() {
        let basis = vec_opt(5, 4, 2).unwrap();
        let (m, cert) = cell_min_alignment(&basis, 0).unwrap();
        assert_eq!(cert, Certificate::Sampled);
        assert!(m.is_finite());
    }

    #[test]
    fn find_svp_known_sizes() {
        // alpha = 0 accepts the first candidate size (three evenly spaced
        // vectors reach m_i = 1/2 >= 0).
        let s = find_svp(0.0, 2, None, 0).unwrap();
        assert_eq!(s.len(), 3);

        // Hexagon midpoints sit exactly at sqrt(3)/2; the closed-cap slack
        // accepts them.
        let s = find_svp(3.0f64.sqrt() / 2.0, 2, None, 0).unwrap();
        assert_eq!(s.len(), 6);
        assert!((s.eta() - 0.5).abs() < 1e-12);

        // Tight caps: ceil(pi / arccos(0.99)) vectors are needed.
        let s = find_svp(0.99, 2, None, 0).unwrap();
        assert_eq!(s.len(), 23);
        assert_eq!(
            s.len(),
            (std::f64::consts::PI / 0.99f64.acos()).ceil() as usize
        );
    }

    #[test]
    fn find_svp_coverage_oracle_on_fine_angular_grid() {
        // Independent coverage check: every direction on a fine grid must be
        // within a closed cap of some basis vector.
        for &alpha in &[0.0, 0.5, 3.0f64.sqrt() / 2.0, 0.95] {
            let s = find_svp(alpha, 2, None, 0).unwrap();
            for k in 0..100_000 {
                let w = unit2(std::f64::consts::TAU * k as f64 / 100_000.0);
                let best = s
                    .basis()
                    .vectors()
                    .iter()
                    .map(|p| p.dot(&w))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    best >= alpha - 2.0 * EPS_COVER,
                    "uncovered at alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn find_svp_in_3d_certifies_coverage() {
        let s = find_svp(0.75, 3, None, 0).unwrap();
        assert!(s.len() <= 14, "unexpectedly large basis: {}", s.len());
        assert_eq!(s.certificate(), Certificate::Exact);
        // Spot-check coverage on random directions.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20_000 {
            let w = random_unit(&mut rng, 3);
            let best = s
                .basis()
                .vectors()
                .iter()
                .map(|p| p.dot(&w))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(best >= 0.75 - 2.0 * EPS_COVER);
        }
    }

    #[test]
    fn find_svp_rejects_bad_alpha() {
        assert!(matches!(
            find_svp(1.0, 2, None, 0),
            Err(SvpError::InvalidAlpha(_))
        ));
        assert!(matches!(
            find_svp(f64::NAN, 2, None, 0),
            Err(SvpError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn cap_exceeded_reports_error() {
        assert!(matches!(
            find_svp_with_cap(0.999999, 2, None, 0, 16),
            Err(SvpError::CoverageCapExceeded { cap: 16, .. })
        ));
    }

    #[test]
    fn cell_lookup_uses_lowest_index_on_ties() {
        let hexagon = vec_opt(6, 2, 0).unwrap();
        assert_eq!(cell_of(&hexagon, &unit2(10.0f64.to_radians())), 0);
        // Exactly between p_0 (0 deg) and p_1 (60 deg).
        assert_eq!(cell_of(&hexagon, &unit2(30.0f64.to_radians())), 0);
        assert_eq!(cell_of(&hexagon, &unit2(0.0)), 0);
    }

    #[test]
    fn neighboring_cap_alignment_bound_holds() {
        // Any two directions in one cell of an alpha-partition align at
        // least to 2 alpha^2 - 1.
        let alpha = 3.0f64.sqrt() / 2.0;
        let s = find_svp(alpha, 2, None, 0).unwrap();
        let bound = 2.0 * alpha * alpha - 1.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut cells: Vec<Vec<DVector<f64>>> = vec![Vec::new(); s.len()];
        for _ in 0..20_000 {
            let w = random_unit(&mut rng, 2);
            cells[cell_of(s.basis(), &w)].push(w);
        }
        for members in cells {
            for pair in members.windows(2) {
                assert!(pair[0].dot(&pair[1]) >= bound - 1e-9);
            }
        }
    }
}
