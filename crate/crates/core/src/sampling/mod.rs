//! Quasi-Monte Carlo sampling of imperfection amplitudes and the resulting
//! buckling-load statistics.

mod normal;
mod sobol;
mod statistics;

pub use normal::{standard_normal, to_gaussian};
pub use sobol::{direction_numbers, sobol_points, SobolStream, MAX_DIMENSION};
pub use statistics::{
    branch_orders, buckling_statistics, buckling_statistics_for, empirical_moments, moments, BucklingSample,
    BucklingSampleSet, ImperfectionDistribution, SamplingSettings,
};
