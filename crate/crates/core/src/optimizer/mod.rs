//! Robust sizing optimisation: the weighted mean/std objective under a fixed
//! volume, Bayesian optimisation with expected improvement and sequential
//! domain reduction, and Pareto sweeps over the weight.

mod bayes;
mod problem;

pub use bayes::{
    bayes_optimize, expected_improvement, maximize_acquisition, AcquisitionSettings, BayesSettings, DomainReduction,
    DomainReductionSettings, EvalStatus, Evaluation, OptimizationHistory, Record, EI_XI,
};
pub use problem::{
    compute_normalizers, eliminate_volume_constraint, optimize, pareto_sweep, write_history_csv, Objective,
    OptimizationResult, ParetoRow, RobustProblem, PENALTY,
};
