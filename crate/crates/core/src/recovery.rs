//! Recovery control synthesis: probing every direction of a spherical
//! partition to re-enter sensing range after contact is lost.
//!
//! The robot knows its state only up to a ball B(c0, r0) and the landmark
//! was within the sensing radius r at the last hit. The synthesized control
//! sequence cancels the open-loop drift and places the state near
//! c0 + (r - |A^s - I| r0) p_i for each partition direction p_i in turn.
//! Whichever cell the landmark bearing falls into, the matching probe comes
//! within r of it, provided r0 and the partition overlap eta satisfy the
//! margin conditions checked here.
//!
//! Under-actuated plants spend one controllability-index window of steps per
//! probe, steering through the Gramian; with full actuation that collapses
//! to one step per probe.

use crate::dynamics::{spectral_norm, LinSys};
use crate::svp::UnitVectorSet;
use nalgebra::{DMatrix, DVector};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryError {
    DimensionMismatch { expected: usize, got: usize },
    NonPositiveRadius(f64),
    NegativeBallRadius(f64),
    NegativeProbeCoefficient { probe: usize, coefficient: f64 },
    SingularGramian,
}

impl fmt::Display for RecoveryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecoveryError::DimensionMismatch { expected, got } => {
                write!(f, "expected dimension {expected}, got {got}")
            }
            RecoveryError::NonPositiveRadius(r) => {
                write!(f, "sensing radius must be positive and finite, got {r}")
            }
            RecoveryError::NegativeBallRadius(r) => {
                write!(f, "uncertainty ball radius must be nonnegative, got {r}")
            }
            RecoveryError::NegativeProbeCoefficient { probe, coefficient } => {
                write!(
                    f,
                    "probe {probe} has negative reach coefficient {coefficient}; \
                     the uncertainty ball is too large for the sensing radius"
                )
            }
            RecoveryError::SingularGramian => write!(f, "reachability Gramian is singular"),
        }
    }
}

impl std::error::Error for RecoveryError {}

fn validate_ball(r0: f64, r: f64) -> Result<(), RecoveryError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(RecoveryError::NonPositiveRadius(r));
    }
    if !(r0.is_finite() && r0 >= 0.0) {
        return Err(RecoveryError::NegativeBallRadius(r0));
    }
    Ok(())
}

/// Probe controls for a fully actuated plant (x_{k+1} = A x_k + u_k).
///
/// Given the control u0 already applied at the trigger step, returns
/// u_1 .. u_N with u_i = (r - |A^{i+1} - I| r0) p_i - (A^{i+1} - I) c0 -
/// A S_i, where S_i is the zero-state response of the controls so far.
/// After applying them the i-th probe state satisfies, for any x0 in the
/// ball, x_{i+1} = A^{i+1} x0 + (r - |A^{i+1} - I| r0) p_i - (A^{i+1} - I) c0.
pub fn rcs(
    a: &DMatrix<f64>,
    directions: &UnitVectorSet,
    c0: &DVector<f64>,
    r0: f64,
    r: f64,
    u0: &DVector<f64>,
) -> Result<Vec<DVector<f64>>, RecoveryError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "state matrix must be square");
    validate_ball(r0, r)?;
    for dim in [directions.dim(), c0.len(), u0.len()] {
        if dim != n {
            return Err(RecoveryError::DimensionMismatch {
                expected: n,
                got: dim,
            });
        }
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let mut out = Vec::with_capacity(directions.len());
    let mut response = u0.clone();
    let mut a_pow = a * a;
    for (idx, p) in directions.vectors().iter().enumerate() {
        let shifted = &a_pow - &eye;
        let coefficient = r - spectral_norm(&shifted) * r0;
        if coefficient < 0.0 {
            return Err(RecoveryError::NegativeProbeCoefficient {
                probe: idx + 1,
                coefficient,
            });
        }
        let u = p * coefficient - &shifted * c0 - a * &response;
        response = a * &response + &u;
        a_pow = a * &a_pow;
        out.push(u);
    }
    Ok(out)
}

/// Probe controls through the input matrix, one controllability-index
/// window per partition direction.
///
/// For block i and in-block step j the control is
/// (A^{nbar-j} B)' W^{-1} [ (r - |A^{nbar i + 1} - I| r0) p_i -
/// (A^{nbar i + 1} - I) c0 - sum of the drifted earlier inputs ],
/// so the Gramian cancellation collapses each block to the same probe
/// geometry as the fully actuated case. With B = I this reduces exactly
/// to `rcs`.
pub fn generalized_rcs(
    sys: &LinSys,
    directions: &UnitVectorSet,
    c0: &DVector<f64>,
    r0: f64,
    r: f64,
    u0: &DVector<f64>,
) -> Result<Vec<DVector<f64>>, RecoveryError> {
    let n = sys.state_dim();
    validate_ball(r0, r)?;
    for (dim, expected) in [
        (directions.dim(), n),
        (c0.len(), n),
        (u0.len(), sys.input_dim()),
    ] {
        if dim != expected {
            return Err(RecoveryError::DimensionMismatch { expected, got: dim });
        }
    }

    let a = sys.a();
    let b = sys.b();
    let nbar = sys.controllability_index();
    let eye = DMatrix::<f64>::identity(n, n);
    let w_lu = sys.gramian().clone().lu();

    // (A^{nbar-j} B)' gains, j = 1 .. nbar.
    let mut gains = Vec::with_capacity(nbar);
    let mut akb = b.clone();
    for _ in 0..nbar {
        gains.push(akb.transpose());
        akb = a * &akb;
    }
    gains.reverse();

    let mut a_nbar = eye.clone();
    for _ in 0..nbar {
        a_nbar = a * &a_nbar;
    }

    let mut out = Vec::with_capacity(directions.len() * nbar);
    let mut response = b * u0;
    let mut a_pow = &a_nbar * a;
    for (idx, p) in directions.vectors().iter().enumerate() {
        let shifted = &a_pow - &eye;
        let coefficient = r - spectral_norm(&shifted) * r0;
        if coefficient < 0.0 {
            return Err(RecoveryError::NegativeProbeCoefficient {
                probe: idx + 1,
                coefficient,
            });
        }
        let target = p * coefficient - &shifted * c0 - &a_nbar * &response;
        let weights = w_lu.solve(&target).ok_or(RecoveryError::SingularGramian)?;
        for gain in &gains {
            let u = gain * &weights;
            response = a * &response + b * &u;
            out.push(u);
        }
        a_pow = &a_pow * &a_nbar;
    }
    Ok(out)
}

/// Largest probe drift gain, max over k = 1 .. steps of |A^{k+1} - I|.
pub fn max_deviation(a: &DMatrix<f64>, steps: usize) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "state matrix must be square");
    assert!(steps >= 1, "need at least one probe step");
    let eye = DMatrix::<f64>::identity(n, n);
    let mut a_pow = a * a;
    let mut best = 0.0f64;
    for _ in 1..=steps {
        best = best.max(spectral_norm(&(&a_pow - &eye)));
        a_pow = a * &a_pow;
    }
    best
}

/// One side-by-side comparison of a sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl ConditionCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Uncertainty-ball budget: r0 <= r (1 - eta) / (D (3 - eta)).
pub fn check_recovery_condition(r0: f64, r: f64, eta: f64, d: f64) -> ConditionCheck {
    ConditionCheck {
        lhs: r0,
        rhs: r * (1.0 - eta) / (d * (3.0 - eta)),
    }
}

/// Estimate-diameter budget, the ball condition relaxed through the tightest
/// enclosing ball of a set of that diameter:
/// diam <= r (1 - eta) / (Dbar (3 - eta)) sqrt(2 (n + 1) / n).
pub fn check_diameter_condition(
    diam: f64,
    r: f64,
    eta: f64,
    dbar: f64,
    n: usize,
) -> ConditionCheck {
    let jung = (2.0 * (n as f64 + 1.0) / n as f64).sqrt();
    ConditionCheck {
        lhs: diam,
        rhs: r * (1.0 - eta) / (dbar * (3.0 - eta)) * jung,
    }
}

/// Landmark-region budget: the in-range state estimate is never wider than
/// diam(M) + 2r, so requiring
/// diam(M) <= r [ (1 - eta) / (Dbar (3 - eta)) sqrt(2 (n + 1) / n) - 2 ]
/// keeps every recovery trigger inside the diameter budget.
pub fn check_landmark_condition(
    diam_m: f64,
    r: f64,
    eta: f64,
    dbar: f64,
    n: usize,
) -> ConditionCheck {
    let jung = (2.0 * (n as f64 + 1.0) / n as f64).sqrt();
    ConditionCheck {
        lhs: diam_m,
        rhs: r * ((1.0 - eta) / (dbar * (3.0 - eta)) * jung - 2.0),
    }
}

/// A synthesized probe sequence handed out one control per step.
pub struct RecoveryPlan {
    controls: Vec<DVector<f64>>,
    cursor: usize,
}

impl RecoveryPlan {
    pub fn new(
        sys: &LinSys,
        directions: &UnitVectorSet,
        c0: &DVector<f64>,
        r0: f64,
        r: f64,
        u0: &DVector<f64>,
    ) -> Result<Self, RecoveryError> {
        let controls = generalized_rcs(sys, directions, c0, r0, r, u0)?;
        Ok(RecoveryPlan {
            controls,
            cursor: 0,
        })
    }

    /// Total steps in the plan, partition size times the controllability
    /// index.
    pub fn budget(&self) -> usize {
        self.controls.len()
    }

    pub fn issued(&self) -> usize {
        self.cursor
    }

    pub fn exhausted(&self) -> bool {
        self.cursor >= self.controls.len()
    }

    pub fn next_control(&mut self) -> Option<DVector<f64>> {
        let u = self.controls.get(self.cursor).cloned();
        if u.is_some() {
            self.cursor += 1;
        }
        u
    }
}
