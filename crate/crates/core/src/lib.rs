//! Active localization of unstable discrete-time linear systems from one-bit
//! landmark-proximity measurements.
//!
//! A robot with expanding open-loop dynamics only learns, at each step,
//! whether it is within range `r` of an unknown landmark. The crate builds
//! the machinery to localize anyway: spherical Voronoi partitions of the unit
//! sphere (`svp`), set-membership estimation of the initial state and the
//! landmark from pairwise measurement geometry (`estimator`), recovery
//! control sequences that sweep the sensing ball when the signal is lost
//! (`recovery`), and a closed loop tying them together with reproducible
//! experiments (`harness`).

pub mod dynamics;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod recovery;
pub mod svp;
