//! Discrete-time linear plant x_{k+1} = A x_k + B u_k.
//!
//! Construction checks the two standing assumptions everything downstream
//! relies on: every open-loop mode strictly expands (all eigenvalue moduli
//! above 1) and the pair (A, B) is controllable. Both are cheap to verify
//! once, and failing fast here beats chasing silent divergence later.

use crate::geometry::{GeometryError, Polytope};
use nalgebra::{DMatrix, DVector};
use std::fmt;

/// Eigenvalue moduli must exceed 1 by at least this margin.
pub const INSTABILITY_MARGIN: f64 = 1e-12;

/// Singular-value ratio beyond which (A^k - I) is treated as numerically
/// uninvertible.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum DynError {
    EmptyMatrix,
    NonSquare { rows: usize, cols: usize },
    InputRowMismatch { state_dim: usize, rows: usize },
    NonFiniteEntry,
    NotUnstable { modulus: f64 },
    NotControllable { rank: usize, dim: usize },
    InvalidExponent(f64),
    IllConditioned { step: usize },
}

impl fmt::Display for DynError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynError::EmptyMatrix => write!(f, "system matrices must be nonempty"),
            DynError::NonSquare { rows, cols } => {
                write!(f, "state matrix must be square, got {rows}x{cols}")
            }
            DynError::InputRowMismatch { state_dim, rows } => {
                write!(
                    f,
                    "input matrix has {rows} rows, state dimension is {state_dim}"
                )
            }
            DynError::NonFiniteEntry => write!(f, "system matrices contain a non-finite entry"),
            DynError::NotUnstable { modulus } => {
                write!(
                    f,
                    "open-loop mode with modulus {modulus} is not strictly expanding"
                )
            }
            DynError::NotControllable { rank, dim } => {
                write!(f, "controllability matrix has rank {rank}, need {dim}")
            }
            DynError::InvalidExponent(c) => {
                write!(f, "decay exponent must lie in (0, 1], got {c}")
            }
            DynError::IllConditioned { step } => {
                write!(f, "A^{step} - I exceeded conditioning limits")
            }
        }
    }
}

impl std::error::Error for DynError {}

/// Validated unstable controllable plant.
#[derive(Debug, Clone)]
pub struct LinSys {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    lambda_min: f64,
    ctrl_index: usize,
    gramian: DMatrix<f64>,
}

impl LinSys {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, DynError> {
        let n = a.nrows();
        if n == 0 || b.ncols() == 0 {
            return Err(DynError::EmptyMatrix);
        }
        if a.ncols() != n {
            return Err(DynError::NonSquare {
                rows: n,
                cols: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(DynError::InputRowMismatch {
                state_dim: n,
                rows: b.nrows(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(DynError::NonFiniteEntry);
        }

        let lambda_min = a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(f64::INFINITY, f64::min);
        if lambda_min <= 1.0 + INSTABILITY_MARGIN {
            return Err(DynError::NotUnstable {
                modulus: lambda_min,
            });
        }

        let ctrl_index = controllability_index_of(&a, &b).ok_or_else(|| {
            let full = controllability_blocks(&a, &b, n);
            DynError::NotControllable {
                rank: numeric_rank(&full),
                dim: n,
            }
        })?;

        let gramian = gramian_with(&a, &b, ctrl_index);

        Ok(LinSys {
            a,
            b,
            lambda_min,
            ctrl_index,
            gramian,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Smallest eigenvalue modulus of A, strictly above 1.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Smallest k with rank [B AB .. A^{k-1}B] = n.
    pub fn controllability_index(&self) -> usize {
        self.ctrl_index
    }

    /// Reachability Gramian over one controllability-index window,
    /// sum of A^k B B' A'^k for k = 0 .. index - 1.
    pub fn gramian(&self) -> &DMatrix<f64> {
        &self.gramian
    }

    pub fn gramian_with_horizon(&self, steps: usize) -> DMatrix<f64> {
        assert!(steps >= 1, "gramian horizon must be positive");
        gramian_with(&self.a, &self.b, steps)
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.state_dim(), "state dimension mismatch");
        assert_eq!(u.len(), self.input_dim(), "input dimension mismatch");
        &self.a * x + &self.b * u
    }

    /// State reached from the origin after applying the given controls,
    /// sum of A^{k-1-j} B u_j.
    pub fn zero_state_response(&self, controls: &[DVector<f64>]) -> DVector<f64> {
        let mut s = DVector::zeros(self.state_dim());
        for u in controls {
            s = self.step(&s, u);
        }
        s
    }

    /// Exact forward image of a vertex-represented set under the given
    /// control sequence: A^k X + {zero-state response}.
    pub fn reach(
        &self,
        controls: &[DVector<f64>],
        set: &Polytope,
    ) -> Result<Polytope, GeometryError> {
        let mut t = DMatrix::identity(self.state_dim(), self.state_dim());
        for _ in 0..controls.len() {
            t = &self.a * t;
        }
        let d = self.zero_state_response(controls);
        set.affine_image(&t, &d)
    }

    pub fn power_table(&self) -> PowerTable {
        PowerTable::new(self.a.clone())
    }

    /// Certifies K = max_k |(A^k - I)^{-1}| lambda_min^{c k} over
    /// k = 1 .. horizon, so that the inverse norm at any scanned step is
    /// bounded by K lambda_min^{-c k}.
    pub fn fit_growth_bound(&self, c: f64, horizon: usize) -> Result<f64, DynError> {
        if !c.is_finite() || c <= 0.0 || c > 1.0 {
            return Err(DynError::InvalidExponent(c));
        }
        assert!(horizon >= 1, "growth bound horizon must be positive");
        let n = self.state_dim();
        let eye = DMatrix::<f64>::identity(n, n);
        let mut power = eye.clone();
        let mut best = 0.0f64;
        for k in 1..=horizon {
            power = &self.a * &power;
            if power.iter().any(|v| !v.is_finite()) {
                return Err(DynError::IllConditioned { step: k });
            }
            let shifted = &power - &eye;
            let sv = shifted.svd(false, false).singular_values;
            let smax = sv.iter().fold(0.0f64, |m, &s| m.max(s));
            let smin = sv.iter().fold(f64::INFINITY, |m, &s| m.min(s));
            // NaN (an overflowed power) must land in the error branch too.
            let well_conditioned = smin > smax / CONDITION_LIMIT;
            if !well_conditioned {
                return Err(DynError::IllConditioned { step: k });
            }
            best = best.max(self.lambda_min.powf(c * k as f64) / smin);
        }
        Ok(best)
    }
}

fn gramian_with(a: &DMatrix<f64>, b: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut w = DMatrix::zeros(n, n);
    let mut akb = b.clone();
    for k in 0..steps {
        w += &akb * akb.transpose();
        if k + 1 < steps {
            akb = a * &akb;
        }
    }
    w
}

pub(crate) fn controllability_blocks(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    count: usize,
) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut blocks = DMatrix::zeros(n, m * count);
    let mut akb = b.clone();
    for k in 0..count {
        blocks.view_mut((0, k * m), (n, m)).copy_from(&akb);
        if k + 1 < count {
            akb = a * &akb;
        }
    }
    blocks
}

pub(crate) fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    m.rank(1e-10 * scale.max(1.0))
}

fn controllability_index_of(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<usize> {
    let n = a.nrows();
    for k in 1..=n {
        let blocks = controllability_blocks(a, b, k);
        if numeric_rank(&blocks) == n {
            return Some(k);
        }
    }
    None
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s))
}

/// Smallest singular value.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s))
}

/// Cache of powers A^0, A^1, .. grown on demand.
///
/// Lives outside LinSys so each simulation trial owns its table; a shared
/// cache across parallel trials would serialize them on a lock.
pub struct PowerTable {
    a: DMatrix<f64>,
    powers: Vec<DMatrix<f64>>,
}

impl PowerTable {
    pub fn new(a: DMatrix<f64>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "power table needs a square matrix");
        PowerTable {
            a,
            powers: vec![DMatrix::identity(n, n)],
        }
    }

    pub fn power(&mut self, k: usize) -> &DMatrix<f64> {
        while self.powers.len() <= k {
            let next = &self.a * self.powers.last().expect("table starts at A^0");
            self.powers.push(next);
        }
        &self.powers[k]
    }
}
