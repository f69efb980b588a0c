//! Restricted isometry constants over piecewise-constant matrices, the
//! resulting uniqueness certificate, and an exhaustive combinatorial solver
//! for tiny instances.
//!
//! A matrix `Z` with `n1` rows is described by the set of difference indices
//! `i` (1-based) where `Z(i,:) != Z(i+1,:)`. For a fixed index set the
//! admissible matrices form a linear subspace, so the extreme values of
//! `||A(Z)||^2 / ||Z||^2` are the extreme eigenvalues of the operator
//! restricted to an orthonormal basis of that subspace.

use itertools::Itertools;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prox::{symmetric_eigen, thin_svd};
use crate::problem::LiftedOperator;

/// Default cap on the number of difference patterns enumerated.
pub const DEFAULT_PATTERN_BUDGET: u64 = 1_000_000;

/// Dense linear map on `n1 x n2` matrices, vectorized column-major, with
/// `n_free` trailing unconstrained coordinates (the `a` coefficients for
/// lifted ARX operators).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOperator {
    pub matrix: DMatrix<f64>,
    pub n1: usize,
    pub n2: usize,
    pub n_free: usize,
}

impl MatrixOperator {
    pub fn new(matrix: DMatrix<f64>, n1: usize, n2: usize, n_free: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Dimension(format!("operator domain {n1}x{n2} is empty")));
        }
        if matrix.ncols() != n1 * n2 + n_free {
            return Err(Error::Dimension(format!(
                "operator has {} columns, expected {}x{} + {}",
                matrix.ncols(),
                n1,
                n2,
                n_free
            )));
        }
        Ok(Self { matrix, n1, n2, n_free })
    }

    /// Wraps a single-sequence lifted operator; the `a` columns become free.
    pub fn from_lifted(op: &LiftedOperator) -> Result<Self> {
        let blocks = op.x_block_rows();
        if blocks.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "pattern analysis needs exactly one sequence, got {}",
                blocks.len()
            )));
        }
        let n1 = blocks[0];
        let n2 = op.n_b();
        Self::new(op.matrix.clone(), n1, n2, op.num_cols() - n1 * n2)
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, z: &DMatrix<f64>, free: &DVector<f64>) -> Result<DVector<f64>> {
        if z.shape() != (self.n1, self.n2) || free.len() != self.n_free {
            return Err(Error::Dimension("argument does not match the operator domain".into()));
        }
        let mut v = DVector::zeros(self.matrix.ncols());
        v.rows_mut(0, self.n1 * self.n2).copy_from_slice(z.as_slice());
        v.rows_mut(self.n1 * self.n2, self.n_free).copy_from(free);
        Ok(&self.matrix * v)
    }

    /// Orthonormal basis of `{(Z, f) : Z rows constant between the breaks}`.
    fn pattern_basis(&self, breaks: &[usize]) -> DMatrix<f64> {
        let mut bounds = vec![0];
        bounds.extend(breaks.iter().copied());
        bounds.push(self.n1);
        let segs = bounds.len() - 1;
        let dim = segs * self.n2 + self.n_free;
        let mut basis = DMatrix::zeros(self.n1 * self.n2 + self.n_free, dim);
        for c in 0..self.n2 {
            for (s, w) in bounds.windows(2).enumerate() {
                let val = 1.0 / ((w[1] - w[0]) as f64).sqrt();
                for r in w[0]..w[1] {
                    basis[(c * self.n1 + r, c * segs + s)] = val;
                }
            }
        }
        for f in 0..self.n_free {
            basis[(self.n1 * self.n2 + f, segs * self.n2 + f)] = 1.0;
        }
        basis
    }
}

/// RIP constants at levels `k` and `2k` and the uniqueness verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct RipReport {
    pub k: usize,
    pub rip_epsilon: f64,
    pub rip_epsilon_2k: f64,
    /// Patterns evaluated at level `2k`.
    pub patterns_checked: u64,
    pub certified_unique: bool,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn check_domain(op: &MatrixOperator, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("sparsity level must be positive".into()));
    }
    if op.n1 < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 rows to freeze both boundary differences, got {}",
            op.n1
        )));
    }
    Ok(())
}

/// Extreme eigenvalues of the Gram matrix of `op` restricted to a pattern.
fn restricted_extremes(op: &MatrixOperator, breaks: &[usize]) -> Result<(f64, f64)> {
    let restricted = &op.matrix * op.pattern_basis(breaks);
    let eig = symmetric_eigen(&restricted.tr_mul(&restricted))?;
    let hi = eig.values[0];
    let lo = eig.values[eig.values.len() - 1].max(0.0);
    Ok((hi, lo))
}

/// Computes `(rip_epsilon, patterns_checked)` at sparsity level `k`.
///
/// Interior difference indices `2..=n1-2` may be active. The subspaces are
/// nested, so only index sets of size `min(k, n1-3)` are evaluated; this
/// gives the same extremes as every set of size at most `k`.
pub fn rip_constant_with_count(op: &MatrixOperator, k: usize, budget: u64) -> Result<(f64, u64)> {
    check_domain(op, k)?;
    let interior: Vec<usize> = (2..=op.n1 - 2).collect();
    let size = k.min(interior.len());
    let count = binomial(interior.len(), size);
    if count > budget {
        return Err(Error::BudgetExceeded { patterns: count, budget });
    }
    let patterns: Vec<Vec<usize>> = interior.iter().copied().combinations(size).collect();
    let eps = patterns
        .par_iter()
        .map(|p| {
            restricted_extremes(op, p).map(|(hi, lo)| (hi - 1.0).max(1.0 - lo).max(0.0))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok((eps, count))
}

pub fn rip_constant(op: &MatrixOperator, k: usize, budget: u64) -> Result<f64> {
    rip_constant_with_count(op, k, budget).map(|(e, _)| e)
}

/// True iff the operator is `(eps, 2k)`-RIP with `eps < 1`.
pub fn certify_uniqueness(op: &MatrixOperator, k: usize, budget: u64) -> Result<bool> {
    check_domain(op, k)?;
    Ok(rip_constant(op, 2 * k, budget)? < 1.0)
}

pub fn rip_report(op: &MatrixOperator, k: usize, budget: u64) -> Result<RipReport> {
    let rip_epsilon = rip_constant(op, k, budget)?;
    let (rip_epsilon_2k, patterns_checked) = rip_constant_with_count(op, 2 * k, budget)?;
    Ok(RipReport {
        k,
        rip_epsilon,
        rip_epsilon_2k,
        patterns_checked,
        certified_unique: rip_epsilon_2k < 1.0,
    })
}

/// Limits and tolerances of [`brute_force_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOptions {
    pub k_max: usize,
    pub epsilon: f64,
    /// Restrict changes to interior difference indices, as in the RIP patterns.
    pub frozen_boundary: bool,
    pub budget: u64,
    /// Relative tolerance for consistency, rank and change tests.
    pub tol: f64,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self {
            k_max: 1,
            epsilon: 0.0,
            frozen_boundary: false,
            budget: DEFAULT_PATTERN_BUDGET,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSolution {
    pub z: DMatrix<f64>,
    pub free: DVector<f64>,
    /// Difference indices where consecutive rows of `z` differ.
    pub changes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceReport {
    /// One representative per class of solutions with the fewest changes.
    pub solutions: Vec<BruteForceSolution>,
    pub min_changes: Option<usize>,
    pub patterns_checked: u64,
    /// Feasible patterns whose restricted operator has a null space, so the
    /// representative is only one member of an affine family.
    pub rank_deficient_patterns: usize,
}

impl BruteForceReport {
    pub fn num_classes(&self) -> usize {
        self.solutions.len()
    }
}

/// Enumerates every change pattern with at most `k_max` changes and returns
/// the rank-one `Z` consistent with `|op(Z, f) - rhs| <= epsilon` that need
/// the fewest changes.
///
/// With `epsilon = 0` each pattern is an exact least-squares solve followed by
/// a consistency check. With `epsilon > 0` the representative of a pattern is
/// its minimum `l1`-norm feasible point, found by linear programming; rank-one
/// members of the slice other than that point are not searched.
pub fn brute_force_solve(
    op: &MatrixOperator,
    rhs: &DVector<f64>,
    opts: &BruteForceOptions,
) -> Result<BruteForceReport> {
    if op.n1 > 14 || op.n2 > 2 || opts.k_max > 3 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive search is limited to n1 <= 14, n2 <= 2, k_max <= 3 (got {}, {}, {})",
            op.n1, op.n2, opts.k_max
        )));
    }
    if op.n1 < 2 {
        return Err(Error::InvalidArgument("need at least 2 rows".into()));
    }
    if rhs.len() != op.num_rows() {
        return Err(Error::Dimension(format!(
            "rhs has {} entries, operator has {} rows",
            rhs.len(),
            op.num_rows()
        )));
    }
    if !(opts.epsilon >= 0.0) {
        return Err(Error::Negative { name: "epsilon", value: opts.epsilon });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let candidates: Vec<usize> = if opts.frozen_boundary {
        (2..=op.n1.saturating_sub(2)).collect()
    } else {
        (1..op.n1).collect()
    };
    let count: u64 = (0..=opts.k_max.min(candidates.len()))
        .map(|s| binomial(candidates.len(), s))
        .fold(0u64, |a, b| a.saturating_add(b));
    if count > opts.budget {
        return Err(Error::BudgetExceeded { patterns: count, budget: opts.budget });
    }
    let patterns: Vec<Vec<usize>> = (0..=opts.k_max.min(candidates.len()))
        .flat_map(|s| candidates.iter().copied().combinations(s))
        .collect();

    let found: Vec<Option<(BruteForceSolution, bool)>> = patterns
        .par_iter()
        .map(|p| solve_pattern(op, rhs, p, opts))
        .collect::<Result<_>>()?;

    let mut rank_deficient_patterns = 0;
    let mut feasible = Vec::new();
    for (sol, deficient) in found.into_iter().flatten() {
        if deficient {
            rank_deficient_patterns += 1;
        }
        feasible.push(sol);
    }
    let min_changes = feasible.iter().map(|s| s.changes.len()).min();
    let mut solutions: Vec<BruteForceSolution> = Vec::new();
    for sol in feasible {
        if Some(sol.changes.len()) != min_changes {
            continue;
        }
        if !solutions.iter().any(|s| same_class(s, &sol, opts.tol)) {
            solutions.push(sol);
        }
    }
    Ok(BruteForceReport {
        solutions,
        min_changes,
        patterns_checked: count,
        rank_deficient_patterns,
    })
}

fn solve_pattern(
    op: &MatrixOperator,
    rhs: &DVector<f64>,
    breaks: &[usize],
    opts: &BruteForceOptions,
) -> Result<Option<(BruteForceSolution, bool)>> {
    let basis = op.pattern_basis(breaks);
    let m = &op.matrix * &basis;
    let scale = 1.0 + rhs.amax();
    let svd = m.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let cutoff = opts.tol * s_max.max(1.0) * m.nrows().max(m.ncols()) as f64;
    let deficient = svd.singular_values.iter().filter(|&&s| s > cutoff).count() < m.ncols();

    let theta = if opts.epsilon == 0.0 {
        let theta = svd
            .solve(rhs, cutoff)
            .map_err(|e| Error::Factorization(e.to_string()))?;
        if (&m * &theta - rhs).amax() > 1e3 * opts.tol * scale {
            return Ok(None);
        }
        theta
    } else {
        match min_l1_feasible(&m, rhs, opts.epsilon)? {
            Some(t) => t,
            None => return Ok(None),
        }
    };

    let full = &basis * theta;
    let nz = op.n1 * op.n2;
    let z = DMatrix::from_column_slice(op.n1, op.n2, &full.as_slice()[..nz]);
    let free = DVector::from_column_slice(&full.as_slice()[nz..]);
    let zsvd = thin_svd(&z)?;
    let sigma1 = zsvd.singular_values[0];
    if sigma1 > 0.0 && zsvd.singular_values.get(1).copied().unwrap_or(0.0) > 1e3 * opts.tol * sigma1 {
        return Ok(None);
    }
    let zt = 1e3 * opts.tol * (1.0 + z.amax());
    let changes = (1..op.n1)
        .filter(|&i| (z.row(i - 1) - z.row(i)).amax() > zt)
        .collect();
    Ok(Some((BruteForceSolution { z, free, changes }, deficient)))
}

/// Minimum `||theta||_1` subject to `|m theta - rhs| <= epsilon`.
fn min_l1_feasible(m: &DMatrix<f64>, rhs: &DVector<f64>, epsilon: f64) -> Result<Option<DVector<f64>>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let p = m.ncols();
    let pos: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for r in 0..m.nrows() {
        let mut terms = Vec::with_capacity(2 * p);
        for c in 0..p {
            terms.push((pos[c], m[(r, c)]));
            terms.push((neg[c], -m[(r, c)]));
        }
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, rhs[r] + epsilon);
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, rhs[r] - epsilon);
    }
    match lp.solve() {
        Ok(sol) => Ok(Some(DVector::from_fn(p, |c, _| sol[pos[c]] - sol[neg[c]]))),
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::Factorization(e.to_string())),
    }
}

fn same_class(a: &BruteForceSolution, b: &BruteForceSolution, tol: f64) -> bool {
    let va = DVector::from_column_slice(a.z.as_slice());
    let vb = DVector::from_column_slice(b.z.as_slice());
    let (na, nb) = (va.norm(), vb.norm());
    let floor = 1e3 * tol;
    if na <= floor || nb <= floor {
        return na <= floor && nb <= floor;
    }
    va.dot(&vb).abs() / (na * nb) >= 1.0 - 1e3 * tol
}
