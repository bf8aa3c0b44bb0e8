//! Linear buckling modes and direct computation of stability points.

mod derivative;
mod extended;
mod modes;

pub use derivative::{directional_derivative_kphi, stiffness_derivative_matrix};
pub use extended::{
    classify, critical_load, extended_system_solve, CriticalKind, Predictor, StabilityPoint, StabilitySettings,
    LIMIT_POINT_THRESHOLD, BORDERED_SWITCH,
};
pub use modes::{buckling_matrices, linear_buckling_modes, ModeBasis, REFERENCE_LOAD_FRACTION};

#[cfg(test)]
mod tests;
