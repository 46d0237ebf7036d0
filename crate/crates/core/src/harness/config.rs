//! On-disk scenario description and its validated in-memory form.
//!
//! A scenario file fixes the plant, the sensing radius, the two uncertainty
//! boxes, the control policy, and the trial counts. Validation builds the
//! plant (rejecting stable or uncontrollable pairs), finds the covering
//! partition, and checks the two feasibility conditions the closed-loop
//! guarantees stand on: the landmark box fits the recovery budget, and the
//! initial box overlaps the sensing neighborhood of the landmark box so
//! trials can start in contact.

use crate::dynamics::{controllability_blocks, numeric_rank, DynError, LinSys, INSTABILITY_MARGIN};
use crate::geometry::{GeometryError, Polytope};
use crate::recovery::{check_landmark_condition, max_deviation, ConditionCheck};
use crate::svp::{find_svp, Svp, SvpError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const DEFAULT_GRID_RESOLUTION: usize = 201;
pub const DEFAULT_C_GROWTH: f64 = 0.5;

/// Horizon over which the growth constant is certified.
pub const GROWTH_HORIZON: usize = 1000;

fn default_alpha() -> f64 {
    3.0f64.sqrt() / 2.0
}

fn default_grid_resolution() -> usize {
    DEFAULT_GRID_RESOLUTION
}

fn default_c_growth() -> f64 {
    DEFAULT_C_GROWTH
}

#[derive(Debug)]
pub enum ConfigError {
    Toml(String),
    Io(std::io::Error),
    Invalid {
        field: &'static str,
        message: String,
    },
    Dyn(DynError),
    Svp(SvpError),
    Geometry(GeometryError),
    LandmarkCondition {
        lhs: f64,
        rhs: f64,
    },
    StartRegionDisjoint {
        distance: f64,
        r: f64,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Toml(e) => write!(f, "config parse: {e}"),
            ConfigError::Io(e) => write!(f, "config read: {e}"),
            ConfigError::Invalid { field, message } => write!(f, "config field {field}: {message}"),
            ConfigError::Dyn(e) => write!(f, "system: {e}"),
            ConfigError::Svp(e) => write!(f, "partition: {e}"),
            ConfigError::Geometry(e) => write!(f, "geometry: {e}"),
            ConfigError::LandmarkCondition { lhs, rhs } => write!(
                f,
                "landmark box diameter {lhs} exceeds the recovery budget {rhs}; \
                 shrink the box, enlarge the sensing radius, or slow the plant"
            ),
            ConfigError::StartRegionDisjoint { distance, r } => write!(
                f,
                "initial box is {distance} away from the landmark box, beyond the \
                 sensing radius {r}; no trial could start in contact"
            ),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<DynError> for ConfigError {
    fn from(e: DynError) -> Self {
        ConfigError::Dyn(e)
    }
}

impl From<SvpError> for ConfigError {
    fn from(e: SvpError) -> Self {
        ConfigError::Svp(e)
    }
}

impl From<GeometryError> for ConfigError {
    fn from(e: GeometryError) -> Self {
        ConfigError::Geometry(e)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Row-major state matrix.
    pub a: Vec<Vec<f64>>,
    /// Row-major input matrix.
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub center: Vec<f64>,
    pub side: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    /// Drift open loop; the plant's instability does the exploring.
    #[default]
    Zero,
    /// Uniform dither in [-scale, scale] per input channel.
    BoundedRandom { scale: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub trials: usize,
    pub max_steps: usize,
    /// Sensing radius.
    pub r: f64,
    /// Cap opening of the recovery partition.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Cloud points per axis.
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    /// Decay-split exponent for the growth constant.
    #[serde(default = "default_c_growth")]
    pub c_growth: f64,
    pub system: SystemConfig,
    pub x0_box: BoxConfig,
    pub m_box: BoxConfig,
    #[serde(default)]
    pub arbitrary_control_policy: PolicyConfig,
}

fn matrix_from_rows(rows: &[Vec<f64>], field: &'static str) -> Result<DMatrix<f64>, ConfigError> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if nrows == 0 || ncols == 0 {
        return Err(ConfigError::Invalid {
            field,
            message: "matrix must be nonempty".into(),
        });
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(ConfigError::Invalid {
            field,
            message: "rows must all have the same length".into(),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

impl BoxConfig {
    pub fn to_polytope(&self, field: &'static str) -> Result<Polytope, ConfigError> {
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(ConfigError::Invalid {
                field,
                message: format!("side must be positive and finite, got {}", self.side),
            });
        }
        if self.center.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid {
                field,
                message: "center must be finite".into(),
            });
        }
        let c = DVector::from_column_slice(&self.center);
        let h = DVector::from_element(c.len(), self.side / 2.0);
        Ok(Polytope::from_box(&(&c - &h), &(c + h))?)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        Self::from_toml_str(&text)
    }

    pub fn state_dim(&self) -> usize {
        self.system.a.len()
    }

    /// Side-by-side values for the four feasibility conditions, computed
    /// without rejecting anything so a failing config can still be
    /// inspected. Each check reads as lhs <= rhs.
    pub fn condition_report(&self) -> Result<ConditionReport, ConfigError> {
        let a = matrix_from_rows(&self.system.a, "system.a")?;
        let b = matrix_from_rows(&self.system.b, "system.b")?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(ConfigError::Invalid {
                field: "system.a",
                message: format!("must be square, got {}x{}", n, a.ncols()),
            });
        }
        if b.nrows() != n {
            return Err(ConfigError::Invalid {
                field: "system.b",
                message: format!("must have {n} rows, got {}", b.nrows()),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "system",
                message: "matrices must be finite".into(),
            });
        }
        self.check_scalars()?;
        let x0_box = self.x0_box.to_polytope("x0_box")?;
        let m_box = self.m_box.to_polytope("m_box")?;
        for (bx, field) in [(&x0_box, "x0_box"), (&m_box, "m_box")] {
            if bx.dim() != n {
                return Err(ConfigError::Invalid {
                    field,
                    message: format!("center must have {n} entries, got {}", bx.dim()),
                });
            }
        }

        let lambda_min = a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(f64::INFINITY, f64::min);
        let rank = numeric_rank(&controllability_blocks(&a, &b, n));
        let ctrl_index = (1..=n)
            .find(|&k| numeric_rank(&controllability_blocks(&a, &b, k)) == n)
            .unwrap_or(n);

        let svp = find_svp(self.alpha, n, None, self.seed)?;
        let dbar = max_deviation(&a, svp.len() * ctrl_index);
        let landmark = check_landmark_condition(m_box.diameter(), self.r, svp.eta(), dbar, n);
        let start_distance = box_distance(&x0_box, &m_box);

        Ok(ConditionReport {
            instability: ConditionCheck {
                lhs: 1.0 + INSTABILITY_MARGIN,
                rhs: lambda_min,
            },
            controllability: ConditionCheck {
                lhs: n as f64,
                rhs: rank as f64,
            },
            landmark,
            start_overlap: ConditionCheck {
                lhs: start_distance,
                rhs: self.r,
            },
            partition_size: svp.len(),
            ctrl_index,
            dbar,
        })
    }

    fn check_scalars(&self) -> Result<(), ConfigError> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(ConfigError::Invalid {
                field: "r",
                message: format!("sensing radius must be positive, got {}", self.r),
            });
        }
        if self.trials == 0 {
            return Err(ConfigError::Invalid {
                field: "trials",
                message: "need at least one trial".into(),
            });
        }
        if self.max_steps == 0 {
            return Err(ConfigError::Invalid {
                field: "max_steps",
                message: "need at least one step".into(),
            });
        }
        if !(self.alpha.is_finite() && (-1.0..1.0).contains(&self.alpha)) {
            return Err(ConfigError::Invalid {
                field: "alpha",
                message: format!("must lie in [-1, 1), got {}", self.alpha),
            });
        }
        if self.grid_resolution < 2 {
            return Err(ConfigError::Invalid {
                field: "grid_resolution",
                message: "need at least 2 points per axis".into(),
            });
        }
        if !(self.c_growth.is_finite() && self.c_growth > 0.0 && self.c_growth <= 1.0) {
            return Err(ConfigError::Invalid {
                field: "c_growth",
                message: format!("must lie in (0, 1], got {}", self.c_growth),
            });
        }
        if let PolicyConfig::BoundedRandom { scale } = self.arbitrary_control_policy {
            if !(scale.is_finite() && scale >= 0.0) {
                return Err(ConfigError::Invalid {
                    field: "arbitrary_control_policy.scale",
                    message: format!("must be nonnegative, got {scale}"),
                });
            }
        }
        Ok(())
    }

    /// Full validation: builds the plant and the partition, certifies the
    /// growth constant, and enforces the feasibility conditions.
    pub fn validate(&self) -> Result<ValidatedScenario, ConfigError> {
        let report = self.condition_report()?;
        let a = matrix_from_rows(&self.system.a, "system.a")?;
        let b = matrix_from_rows(&self.system.b, "system.b")?;
        let sys = LinSys::new(a, b)?;
        let x0_box = self.x0_box.to_polytope("x0_box")?;
        let m_box = self.m_box.to_polytope("m_box")?;
        let svp = find_svp(self.alpha, sys.state_dim(), None, self.seed)?;

        if !report.landmark.holds() {
            return Err(ConfigError::LandmarkCondition {
                lhs: report.landmark.lhs,
                rhs: report.landmark.rhs,
            });
        }
        if !report.start_overlap.holds() {
            return Err(ConfigError::StartRegionDisjoint {
                distance: report.start_overlap.lhs,
                r: self.r,
            });
        }

        let growth_k = sys.fit_growth_bound(self.c_growth, GROWTH_HORIZON)?;
        let lambda = sys.lambda_min();
        let window = (svp.len() * sys.controllability_index()) as f64;
        let contraction_scale = 4.0 * self.r * growth_k * lambda.powf(self.c_growth * window);
        let contraction_rate = lambda.powf(-self.c_growth);

        Ok(ValidatedScenario {
            config: self.clone(),
            dbar: report.dbar,
            sys,
            svp,
            x0_box,
            m_box,
            growth_k,
            contraction_scale,
            contraction_rate,
        })
    }
}

/// Euclidean distance between two axis-aligned boxes.
fn box_distance(a: &Polytope, b: &Polytope) -> f64 {
    let (alo, ahi) = a.aabb();
    let (blo, bhi) = b.aabb();
    let mut acc = 0.0;
    for i in 0..alo.len() {
        let gap = (blo[i] - ahi[i]).max(alo[i] - bhi[i]).max(0.0);
        acc += gap * gap;
    }
    acc.sqrt()
}

/// The four feasibility conditions, each as lhs <= rhs.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    /// 1 + margin <= smallest eigenvalue modulus.
    pub instability: ConditionCheck,
    /// State dimension <= controllability rank.
    pub controllability: ConditionCheck,
    /// Landmark box diameter <= recovery budget.
    pub landmark: ConditionCheck,
    /// Distance between the boxes <= sensing radius.
    pub start_overlap: ConditionCheck,
    pub partition_size: usize,
    pub ctrl_index: usize,
    pub dbar: f64,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.instability.holds()
            && self.controllability.holds()
            && self.landmark.holds()
            && self.start_overlap.holds()
    }
}

/// A scenario that passed validation, with everything derived from it that
/// trials share.
pub struct ValidatedScenario {
    pub config: ScenarioConfig,
    pub sys: LinSys,
    pub svp: Svp,
    pub x0_box: Polytope,
    pub m_box: Polytope,
    /// Largest probe drift gain over one full recovery sweep.
    pub dbar: f64,
    /// Certified growth constant K over the fixed horizon.
    pub growth_k: f64,
    /// Contraction curve is min(scale * rate^k, initial diameter).
    pub contraction_scale: f64,
    pub contraction_rate: f64,
}

impl ValidatedScenario {
    /// Steps one recovery sweep can take: partition size times the
    /// controllability index.
    pub fn recovery_window(&self) -> usize {
        self.svp.len() * self.sys.controllability_index()
    }

    /// Guaranteed ceiling for the initial-estimate diameter at step k.
    pub fn theoretical_bound(&self, k: usize) -> f64 {
        let curve = self.contraction_scale * self.contraction_rate.powi(k as i32);
        curve.min(self.x0_box.diameter())
    }
}
