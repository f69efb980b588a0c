use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::problem::{build_lifted_operator, build_problem, OutputSeries, ProblemSpec};
use crate::prox::{box_clip, shrink_rows_in_place, svt};

use super::SolverOptions;

/// Iteration counters and final residuals of an ADMM run.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

pub(crate) struct AdmmOutput {
    pub x_blocks: Vec<DMatrix<f64>>,
    pub a: DVector<f64>,
    pub diagnostics: Diagnostics,
}

/// Problem data for one run: `X_j = Q_j S_j` where each `Q_j` has orthonormal
/// columns, minimizing `nuclear_weight ||X||_* + group_weight sum_j ||D X_j||_{2,1}`.
pub(crate) struct Reduced<'a> {
    pub spec: &'a ProblemSpec,
    pub bases: Vec<DMatrix<f64>>,
    pub nuclear_weight: f64,
    pub group_weight: f64,
}

// Offsets of the stacked copy vector z = [S; D Q S; A T v].
struct Layout {
    n_b: usize,
    reduced_rows: Vec<usize>,
    s_offsets: Vec<usize>,
    s_len: usize,
    diff_offsets: Vec<usize>,
    diff_rows: Vec<usize>,
    diff_len: usize,
    data_len: usize,
    dim: usize,
}

impl Layout {
    fn z3(&self) -> std::ops::Range<usize> {
        let start = self.s_len + self.diff_len;
        start..start + self.data_len
    }
    fn rows(&self) -> usize {
        self.s_len + self.diff_len + self.data_len
    }
}

pub(crate) fn run(problem: &Reduced<'_>, options: &SolverOptions) -> Result<AdmmOutput> {
    options.validate()?;
    let spec = problem.spec;
    let n_b = spec.orders().n_b;
    let n_a = spec.orders().n_a;

    // Work on outputs normalized to unit peak; a is unaffected, X and w scale.
    let scale = match spec.max_abs_output() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let scaled = build_problem(
        spec.sequences()
            .iter()
            .map(|s| OutputSeries::new(s.label.clone(), s.samples.iter().map(|v| v / scale).collect()))
            .collect(),
        spec.orders(),
        spec.epsilon() / scale,
    )?;
    let op = build_lifted_operator(&scaled);
    let eps = scaled.epsilon();

    let use_group = problem.group_weight > 0.0;
    let reduced_rows: Vec<usize> = problem.bases.iter().map(|q| q.ncols()).collect();
    let mut s_offsets = Vec::new();
    let mut acc = 0;
    for &m in &reduced_rows {
        s_offsets.push(acc);
        acc += m * n_b;
    }
    let s_len = acc;
    let diff_rows: Vec<usize> = if use_group {
        spec.sequences().iter().map(|s| s.len() - 1).collect()
    } else {
        vec![0; spec.num_sequences()]
    };
    let mut diff_offsets = Vec::new();
    acc = s_len;
    for &r in &diff_rows {
        diff_offsets.push(acc);
        acc += r * n_b;
    }
    let layout = Layout {
        n_b,
        reduced_rows,
        s_offsets,
        s_len,
        diff_offsets,
        diff_rows,
        diff_len: acc - s_len,
        data_len: op.num_rows(),
        dim: s_len + n_a,
    };

    // T maps v = [vec S_1, .., vec S_J, a] onto the lifted column order.
    let mut t_map = DMatrix::zeros(op.num_cols(), layout.dim);
    let mut full_off = 0;
    for (j, q) in problem.bases.iter().enumerate() {
        let (rows, m) = q.shape();
        for c in 0..n_b {
            let mut blk = t_map.view_mut((full_off + c * rows, layout.s_offsets[j] + c * m), (rows, m));
            blk.copy_from(q);
        }
        full_off += rows * n_b;
    }
    for k in 0..n_a {
        t_map[(full_off + k, s_len + k)] = 1.0;
    }

    let mut mat = DMatrix::zeros(layout.rows(), layout.dim);
    for i in 0..s_len {
        mat[(i, i)] = 1.0;
    }
    if use_group {
        for (j, q) in problem.bases.iter().enumerate() {
            let rows = q.nrows();
            let dq = q.rows(0, rows - 1) - q.rows(1, rows - 1);
            let m = q.ncols();
            for c in 0..n_b {
                let mut blk = mat.view_mut(
                    (layout.diff_offsets[j] + c * (rows - 1), layout.s_offsets[j] + c * m),
                    (rows - 1, m),
                );
                blk.copy_from(&dq);
            }
        }
    }
    let data_rows = layout.z3();
    mat.rows_mut(data_rows.start, layout.data_len)
        .copy_from(&(&op.matrix * &t_map));
    let y = op.rhs.clone();
    let m_rows = layout.rows();
    let blocks = [
        0..layout.s_len,
        layout.s_len..layout.s_len + layout.diff_len,
        layout.z3(),
    ];

    // One penalty per split block. The two regularizer copies start at a
    // penalty proportional to their objective weight so that the prox
    // thresholds w_i / rho_i begin at the same scale.
    let peak = problem.nuclear_weight.max(problem.group_weight);
    let rho = [
        options.rho * (problem.nuclear_weight / peak).max(1e-12),
        options.rho * (problem.group_weight / peak).max(1e-12),
        options.rho,
    ];
    let mut pen = DVector::zeros(m_rows);
    for (b, r) in blocks.iter().zip(&rho) {
        pen.rows_mut(b.start, b.len()).fill(*r);
    }

    // The a-block of the normal matrix is singular when the lagged outputs are
    // degenerate; a small proximal term keeps the x-update well posed without
    // moving fixed points.
    let data_gram = mat.rows(layout.z3().start, layout.data_len).tr_mul(&mat.rows(layout.z3().start, layout.data_len));
    let prox_a = 1e-10 * (1.0 + data_gram.diagonal().amax());
    let factor = factorize(&mat, &pen, prox_a, s_len, n_a)?;

    let mut v = DVector::zeros(layout.dim);
    let mut z = DVector::zeros(m_rows);
    let mut u = DVector::zeros(m_rows);
    let alpha = options.over_relaxation;
    let abs_tol = 1e-3;

    let mut diag = Diagnostics {
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        converged: false,
    };

    for iter in 1..=options.max_iters {
        let mut rhs = mat.tr_mul(&(&z - &u).component_mul(&pen));
        for k in 0..n_a {
            rhs[s_len + k] += prox_a * v[s_len + k];
        }
        v = factor.solve(&rhs);
        let mv = &mat * &v;

        let h = &mv * alpha + &z * (1.0 - alpha);
        let z_old = z.clone();
        z = &h + &u;
        project(&mut z, &layout, problem, &y, eps, &rho)?;
        u += &h - &z;

        let dz = (&z - &z_old).component_mul(&pen);
        let r_norm = (&mv - &z).norm();
        let s_norm = mat.tr_mul(&dz).norm();
        let pri_scale = mv.norm().max(z.norm());
        let dual_scale = mat.tr_mul(&u.component_mul(&pen)).norm();
        let eps_pri = (m_rows as f64).sqrt() * abs_tol * options.tol_primal + options.tol_primal * pri_scale;
        let eps_dual = (layout.dim as f64).sqrt() * abs_tol * options.tol_dual + options.tol_dual * dual_scale;

        diag.iterations = iter;
        diag.primal_residual = r_norm;
        diag.dual_residual = s_norm;
        if r_norm <= eps_pri && s_norm <= eps_dual {
            diag.converged = true;
            break;
        }
    }

    let (mut x_blocks, a) = op.unvectorize(&(&t_map * &v));
    for x in &mut x_blocks {
        *x *= scale;
    }
    Ok(AdmmOutput {
        x_blocks,
        a,
        diagnostics: diag,
    })
}

fn factorize(
    mat: &DMatrix<f64>,
    pen: &DVector<f64>,
    prox_a: f64,
    s_len: usize,
    n_a: usize,
) -> Result<Cholesky<f64, Dyn>> {
    let weighted = DMatrix::from_fn(mat.nrows(), mat.ncols(), |r, c| mat[(r, c)] * pen[r]);
    let mut k = mat.tr_mul(&weighted);
    for i in 0..n_a {
        k[(s_len + i, s_len + i)] += prox_a;
    }
    Cholesky::new(k).ok_or_else(|| Error::Factorization("x-update matrix is not positive definite".into()))
}

fn project(
    z: &mut DVector<f64>,
    layout: &Layout,
    problem: &Reduced<'_>,
    y: &DVector<f64>,
    eps: f64,
    rho: &[f64; 3],
) -> Result<()> {
    let n_b = layout.n_b;

    // Nuclear norm on the stacked reduced blocks.
    let total: usize = layout.reduced_rows.iter().sum();
    let mut stacked = DMatrix::zeros(total, n_b);
    let mut r0 = 0;
    for (j, &m) in layout.reduced_rows.iter().enumerate() {
        let off = layout.s_offsets[j];
        let blk = DMatrix::from_column_slice(m, n_b, &z.as_slice()[off..off + m * n_b]);
        stacked.rows_mut(r0, m).copy_from(&blk);
        r0 += m;
    }
    let shrunk = svt(&stacked, problem.nuclear_weight / rho[0])?;
    r0 = 0;
    for (j, &m) in layout.reduced_rows.iter().enumerate() {
        let off = layout.s_offsets[j];
        let blk = shrunk.rows(r0, m).into_owned();
        z.as_mut_slice()[off..off + m * n_b].copy_from_slice(blk.as_slice());
        r0 += m;
    }

    if problem.group_weight > 0.0 {
        let kappa = problem.group_weight / rho[1];
        for (j, &rows) in layout.diff_rows.iter().enumerate() {
            let off = layout.diff_offsets[j];
            let slice = &mut z.as_mut_slice()[off..off + rows * n_b];
            let mut blk = DMatrix::from_column_slice(rows, n_b, slice);
            shrink_rows_in_place(&mut blk, kappa);
            slice.copy_from_slice(blk.as_slice());
        }
    }

    let range = layout.z3();
    let offset = DVector::from_column_slice(&z.as_slice()[range.clone()]) - y;
    let clipped = box_clip(&offset, eps) + y;
    z.as_mut_slice()[range].copy_from_slice(clipped.as_slice());
    Ok(())
}
