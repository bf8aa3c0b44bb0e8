//! Buckling-load statistics and robust sizing optimisation of geometrically
//! nonlinear pin-jointed trusses with random geometric imperfections.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: truss data, element kinematics, internal forces, tangent
//!   stiffness and the inertia-revealing symmetric factorisation.
//! * [`continuation`]: Newton equilibrium solves and arc-length path
//!   following with stability monitoring.
//! * [`stability`]: linear buckling modes and the extended system that
//!   converges directly to limit and bifurcation points.
//! * [`sampling`]: Sobol points, inverse-normal transform and warm-started
//!   buckling-load statistics.
//! * [`surrogate`]: Gaussian-process regression with Matérn covariance.
//! * [`optimizer`]: the weighted mean/std objective, expected improvement,
//!   Bayesian optimisation with domain reduction, and Pareto sweeps.
//! * [`generators`]: parametric example trusses.

pub mod continuation;
pub mod error;
pub mod generators;
pub mod json;
pub mod local_search;
pub mod model;
pub mod optimizer;
pub mod sampling;
pub mod stability;
pub mod surrogate;

pub use error::{Error, Result};
pub use model::{DesignVector, TrussModel};
