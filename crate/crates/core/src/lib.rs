//! Realizable anti-aliasing sampling spectra.
//!
//! The crate covers the whole pipeline from a spectral design to rendered
//! test images:
//!
//! * [`radial`]: radial grids, the order-0 Hankel transform and closed forms.
//! * [`variational`]: constrained LP/QP design of power spectra `P = F + 1`
//!   that satisfy both realizability conditions (`P >= 0`, `g >= 0`).
//! * [`pointset`]: point sets on the unit torus and baseline generators.
//! * [`synthesis`]: point sets whose pair correlation matches a target.
//! * [`estimation`]: empirical PCF/spectrum estimators, predicted and
//!   Monte-Carlo error spectra.
//! * [`imaging`]: test images, reconstruction and PGM output.
//!
//! Radial quantities are always expressed in normalized coordinates: distances
//! are multiplied by `sqrt(N)` and frequencies divided by `sqrt(N)` for a set
//! of `N` points on the unit torus.

pub mod error;
pub mod estimation;
pub mod imaging;
pub mod io;
pub mod par;
pub mod pointset;
pub mod radial;
pub mod solver;
pub mod synthesis;
pub mod variational;

pub use error::{Error, Result};
pub use pointset::PointSet;
pub use radial::{PairCorrelation, RadialFunction, RadialGrid, RadialSpectrum};

/// Feasibility tolerance shared by the optimizer and its audits.
pub const SOLVER_EPS: f64 = 1e-6;
