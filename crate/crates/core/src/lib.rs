//! Blind identification of ARX models driven by piecewise-constant inputs.
//!
//! Given output records only, the lifted matrix `X = u b^T` turns the
//! bilinear model into linear constraints. The input with the fewest level
//! changes is then approximated by minimizing the nuclear norm of `X` plus a
//! row-group-sparse penalty on its consecutive row differences. See
//! [`solver::solve_bil`] for the convex program, [`solver::refine_pipeline`]
//! for the bias-removal step, [`analysis`] for the restricted-isometry
//! uniqueness certificate and [`baseline`] for the two-step comparison method.

pub mod analysis;
pub mod baseline;
pub mod datagen;
pub mod error;
pub mod extract;
pub mod problem;
pub mod prox;
pub mod solver;

pub use analysis::{
    brute_force_solve, certify_uniqueness, rip_constant, rip_report, BruteForceOptions, MatrixOperator,
    RipReport,
};
pub use baseline::{naive_identify, NaiveEstimate};
pub use datagen::{scenario, scenario_with_seed, Scenario};
pub use error::{Error, Result};
pub use extract::{change_points, factor_rank1, FactoredModel};
pub use problem::{
    build_lifted_operator, build_problem, residual, ArxOrders, LiftedOperator, LiftedVariables,
    OutputSeries, ProblemSpec,
};
pub use prox::ThinSvd;
pub use solver::{
    refine_pipeline, solve_bil, solve_refined, sweep_lambda, BilSolution, Diagnostics, SolverOptions,
    SweepOutcome,
};
