//! Convex blind identification via lifting, solved by two-block ADMM.
//!
//! The program is
//!
//! ```text
//! minimize    ||X||_* + lambda * sum_j ||X_j(1:N-1,:) - X_j(2:N,:)||_{2,1}
//! subject to  y_j(t) = sum_k X_j(t-n_k-k, k) + sum_k a_k y_j(t-k) + w_j(t),  |w_j(t)| <= epsilon
//! ```
//!
//! where `X` stacks the per-sequence blocks row-wise. The `(X, a)` update is a
//! linear solve against a Cholesky factor computed once per run. The copy update is the singular value thresholding,
//! row-group shrinkage and box projection of the three split terms.

mod admm;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extract::{factor_rank1, stack_blocks};
use crate::problem::{residual, LiftedVariables, ProblemSpec};
use crate::prox::{mixed_norm_21, row_diff, thin_svd};

pub use admm::Diagnostics;

/// ADMM parameters. Tolerances are relative to the iterate norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rho: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Over-relaxation factor in `[1, 1.9]`.
    pub over_relaxation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 5000,
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            over_relaxation: 1.6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        if !(self.tol_primal > 0.0) || !(self.tol_dual > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(1.0..=1.9).contains(&self.over_relaxation) {
            return Err(Error::InvalidArgument(format!(
                "over_relaxation must lie in [1, 1.9], got {}",
                self.over_relaxation
            )));
        }
        Ok(())
    }
}

/// Solved lifted program together with its rank-one read-out.
#[derive(Debug, Clone)]
pub struct BilSolution {
    pub vars: LiftedVariables,
    pub lambda: f64,
    /// `||X||_* + lambda * sum_j ||row_diff X_j||_{2,1}`.
    pub objective: f64,
    /// Singular values of the stacked `X`.
    pub singular_values: Vec<f64>,
    /// Input estimate per sequence; zeros when `X = 0`.
    pub u_est: Vec<DVector<f64>>,
    /// Unit-norm input coefficients, `None` when `X = 0`.
    pub b_est: Option<DVector<f64>>,
    pub a_est: DVector<f64>,
    /// `s_2 / s_1`, zero when `s_1 = 0`.
    pub rank_gap: f64,
    pub diagnostics: Diagnostics,
}

impl BilSolution {
    pub fn max_abs_residual(&self, spec: &ProblemSpec) -> Result<f64> {
        crate::problem::max_abs_residual(spec, &self.vars)
    }

    /// True when every residual is within `epsilon + 1e-6 (1 + max|y|)`.
    pub fn is_feasible(&self, spec: &ProblemSpec) -> Result<bool> {
        Ok(self.max_abs_residual(spec)? <= spec.epsilon() + spec.feasibility_tolerance())
    }
}

/// Objective of the lifted program at the given blocks.
pub fn bil_objective(x_blocks: &[DMatrix<f64>], lambda: f64) -> Result<f64> {
    let stacked = stack_blocks(x_blocks);
    let nuclear: f64 = thin_svd(&stacked)?.singular_values.iter().sum();
    if lambda == 0.0 {
        return Ok(nuclear);
    }
    let mut group = 0.0;
    for x in x_blocks {
        if x.nrows() >= 2 {
            group += mixed_norm_21(&row_diff(x)?);
        }
    }
    Ok(nuclear + lambda * group)
}

fn finish(
    spec: &ProblemSpec,
    out: admm::AdmmOutput,
    lambda: f64,
) -> Result<BilSolution> {
    let mut vars = LiftedVariables::zeros(spec);
    vars.x_blocks = out.x_blocks;
    vars.a = out.a;
    vars.w_blocks = residual(spec, &vars)?;

    let objective = bil_objective(&vars.x_blocks, lambda)?;
    let (singular_values, u_est, b_est, rank_gap) = match factor_rank1(&vars.x_blocks, &vars.a) {
        Ok(model) => (
            model.singular_values,
            model.u_est,
            Some(model.b_est),
            model.rank_gap,
        ),
        Err(Error::NoIdentifiableComponent) => (
            vec![0.0; spec.orders().n_b.min(vars.x_blocks.iter().map(|x| x.nrows()).sum())],
            vars.x_blocks.iter().map(|x| DVector::zeros(x.nrows())).collect(),
            None,
            0.0,
        ),
        Err(e) => return Err(e),
    };
    Ok(BilSolution {
        a_est: vars.a.clone(),
        vars,
        lambda,
        objective,
        singular_values,
        u_est,
        b_est,
        rank_gap,
        diagnostics: out.diagnostics,
    })
}

/// Solves the lifted convex program for one `lambda`.
///
/// Runs from a zero start, so the result is a deterministic function of the
/// inputs. A run that hits `max_iters` is still returned, with
/// `diagnostics.converged = false`.
pub fn solve_bil(spec: &ProblemSpec, lambda: f64, options: &SolverOptions) -> Result<BilSolution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Negative { name: "lambda", value: lambda });
    }
    // Dividing the objective by max(1, lambda) keeps the prox thresholds in a
    // range where one penalty works across lambda = 1e0 .. 1e8.
    let norm = lambda.max(1.0);
    let reduced = admm::Reduced {
        spec,
        bases: spec
            .sequences()
            .iter()
            .map(|s| DMatrix::identity(s.len(), s.len()))
            .collect(),
        nuclear_weight: 1.0 / norm,
        group_weight: lambda / norm,
    };
    let out = admm::run(&reduced, options)?;
    finish(spec, out, lambda)
}

/// Orthonormal basis of `{x : x(i) = x(i+1) for i in frozen}`, one column per segment.
fn segment_basis(len: usize, frozen: &BTreeSet<usize>) -> DMatrix<f64> {
    let mut starts = vec![1];
    for i in 1..len {
        if !frozen.contains(&i) {
            starts.push(i + 1);
        }
    }
    let mut q = DMatrix::zeros(len, starts.len());
    for (s, &start) in starts.iter().enumerate() {
        let end = starts.get(s + 1).map_or(len, |next| next - 1);
        let w = 1.0 / ((end + 1 - start) as f64).sqrt();
        for r in start..=end {
            q[(r - 1, s)] = w;
        }
    }
    q
}

/// Nuclear-norm re-solve with `X_j(i,:) = X_j(i+1,:)` enforced for every frozen `i`.
///
/// `freeze[j]` holds 1-based difference indices in `[1, N_j - 1]`.
pub fn solve_refined(
    spec: &ProblemSpec,
    freeze: &[BTreeSet<usize>],
    options: &SolverOptions,
) -> Result<BilSolution> {
    if freeze.len() != spec.num_sequences() {
        return Err(Error::Dimension(format!(
            "{} freeze sets for {} sequences",
            freeze.len(),
            spec.num_sequences()
        )));
    }
    for (j, (set, seq)) in freeze.iter().zip(spec.sequences()).enumerate() {
        if let Some(&bad) = set.iter().find(|&&i| i == 0 || i >= seq.len()) {
            return Err(Error::InvalidArgument(format!(
                "freeze index {bad} for sequence {j} outside [1, {}]",
                seq.len() - 1
            )));
        }
    }
    let reduced = admm::Reduced {
        spec,
        bases: freeze
            .iter()
            .zip(spec.sequences())
            .map(|(set, seq)| segment_basis(seq.len(), set))
            .collect(),
        nuclear_weight: 1.0,
        group_weight: 0.0,
    };
    let out = admm::run(&reduced, options)?;
    finish(spec, out, 0.0)
}

/// Difference indices `i` with `|u(i) - u(i+1)| <= gamma`, per sequence.
pub fn freeze_sets(u_est: &[DVector<f64>], gamma: f64) -> Vec<BTreeSet<usize>> {
    u_est
        .iter()
        .map(|u| {
            u.as_slice()
                .windows(2)
                .enumerate()
                .filter(|(_, w)| (w[0] - w[1]).abs() <= gamma)
                .map(|(i, _)| i + 1)
                .collect()
        })
        .collect()
}

/// Bias-removal step: freeze every small input difference of a previous
/// solution and re-solve with `lambda = 0`.
pub fn refine_pipeline(
    spec: &ProblemSpec,
    bil: &BilSolution,
    gamma: f64,
    options: &SolverOptions,
) -> Result<BilSolution> {
    if !(gamma >= 0.0) {
        return Err(Error::Negative { name: "gamma", value: gamma });
    }
    solve_refined(spec, &freeze_sets(&bil.u_est, gamma), options)
}

/// Result of a lambda grid scan.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub lambda: f64,
    pub solution: BilSolution,
    /// False when no grid point met the gap target and the smallest gap was taken.
    pub qualified: bool,
    /// `(lambda, rank_gap)` for every grid point, in grid order.
    pub trace: Vec<(f64, f64)>,
}

/// Scans an ascending lambda grid and returns the smallest lambda whose
/// solution has `rank_gap <= gap_target`.
///
/// Grid points are solved in parallel; the selection depends only on grid
/// order.
pub fn sweep_lambda(
    spec: &ProblemSpec,
    grid: &[f64],
    gap_target: f64,
    options: &SolverOptions,
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if !(gap_target > 0.0 && gap_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gap target must lie in (0, 1), got {gap_target}"
        )));
    }
    if let Some(l) = grid.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::InvalidArgument(format!("lambda grid entries must be positive, got {l}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be strictly ascending".into()));
    }
    let solutions: Vec<BilSolution> = grid
        .par_iter()
        .map(|&lambda| solve_bil(spec, lambda, options))
        .collect::<Result<_>>()?;
    let trace = solutions.iter().map(|s| (s.lambda, s.rank_gap)).collect();

    let pick = solutions.iter().position(|s| s.b_est.is_some() && s.rank_gap <= gap_target);
    let (idx, qualified) = match pick {
        Some(i) => (i, true),
        None => {
            let best = solutions
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let ka = if a.b_est.is_some() { a.rank_gap } else { f64::INFINITY };
                    let kb = if b.b_est.is_some() { b.rank_gap } else { f64::INFINITY };
                    ka.total_cmp(&kb)
                })
                .map(|(i, _)| i)
                .unwrap_or(0);
            (best, false)
        }
    };
    let solution = solutions.into_iter().nth(idx).expect("index within grid");
    Ok(SweepOutcome {
        lambda: grid[idx],
        solution,
        qualified,
        trace,
    })
}
