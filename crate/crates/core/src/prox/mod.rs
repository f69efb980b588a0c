//! Dense kernels used by the splitting solver: a Gram-matrix thin SVD and the
//! proximal maps of the nuclear norm, the row-wise `l2,1` norm and the box
//! indicator, plus the consecutive-row difference operator and its adjoint.

mod jacobi;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use jacobi::{symmetric_eigen, SymmetricEigen};

/// Thin singular value decomposition `M = U diag(s) V^T` with `r = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub left_vectors: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub right_vectors: DMatrix<f64>,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        scaled_product(&self.left_vectors, &self.singular_values, &self.right_vectors)
    }

    /// `s_2 / s_1`, zero when fewer than two singular values exist or `s_1 = 0`.
    pub fn rank_gap(&self) -> f64 {
        match self.singular_values.as_slice() {
            [s1, s2, ..] if *s1 > 0.0 => s2 / s1,
            _ => 0.0,
        }
    }
}

fn scaled_product(u: &DMatrix<f64>, s: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut us = u.clone();
    for (mut col, &sv) in us.column_iter_mut().zip(s) {
        col *= sv;
    }
    us * v.transpose()
}

/// Thin SVD through the eigendecomposition of the Gram matrix `M^T M`.
///
/// Singular values are recomputed as `||M v_i||`, left vectors as
/// `M v_i / s_i` re-orthogonalized, and completed with unit vectors when
/// `s_i` vanishes. Each right vector has its largest-magnitude entry positive.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.transpose())?;
        let mut out = ThinSvd {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        };
        for i in 0..out.singular_values.len() {
            if needs_flip(out.right_vectors.column(i).iter().copied()) {
                out.right_vectors.column_mut(i).neg_mut();
                out.left_vectors.column_mut(i).neg_mut();
            }
        }
        return Ok(out);
    }

    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok(ThinSvd {
            left_vectors: DMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            right_vectors: DMatrix::zeros(0, 0),
        });
    }
    let gram = m.tr_mul(m);
    let eig = symmetric_eigen(&gram)?;

    let mut v = eig.vectors;
    let mut mv = m * &v;
    let mut sigma: Vec<f64> = mv.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    v = DMatrix::from_fn(cols, cols, |r, c| v[(r, order[c])]);
    mv = DMatrix::from_fn(rows, cols, |r, c| mv[(r, order[c])]);
    sigma = order.iter().map(|&i| sigma[i]).collect();

    for i in 0..cols {
        if needs_flip(v.column(i).iter().copied()) {
            v.column_mut(i).neg_mut();
            mv.column_mut(i).neg_mut();
        }
    }

    let sigma_max = sigma[0];
    let mut u = DMatrix::zeros(rows, cols);
    for i in 0..cols {
        let mut col = if sigma[i] > f64::MIN_POSITIVE && sigma[i] > 1e-300 * sigma_max.max(1.0) {
            mv.column(i) / sigma[i]
        } else {
            DVector::zeros(rows)
        };
        if orthonormalize_against(&mut col, &u, i) < 1e-8 {
            col = completion(&u, i, rows);
        }
        u.set_column(i, &col);
    }

    Ok(ThinSvd {
        left_vectors: u,
        singular_values: sigma,
        right_vectors: v,
    })
}

fn needs_flip(entries: impl Iterator<Item = f64>) -> bool {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for e in entries {
        if e.abs() > best {
            best = e.abs();
            sign = e.signum();
        }
    }
    sign < 0.0
}

// Modified Gram-Schmidt against the first `k` columns of `basis`; returns the
// norm left after projection (before normalization).
fn orthonormalize_against(col: &mut DVector<f64>, basis: &DMatrix<f64>, k: usize) -> f64 {
    let before = col.norm();
    if before == 0.0 {
        return 0.0;
    }
    for _ in 0..2 {
        for j in 0..k {
            let q = basis.column(j);
            let d = q.dot(col);
            col.axpy(-d, &q, 1.0);
        }
    }
    let after = col.norm();
    if after > 0.0 {
        *col /= after;
    }
    after / before
}

fn completion(basis: &DMatrix<f64>, k: usize, rows: usize) -> DVector<f64> {
    for e in 0..rows {
        let mut cand = DVector::zeros(rows);
        cand[e] = 1.0;
        if orthonormalize_against(&mut cand, basis, k) > 0.5 {
            return cand;
        }
    }
    unreachable!("fewer than `rows` orthonormal vectors always admit a completion")
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(thin_svd(m)?.singular_values.iter().sum())
}

/// Sum over rows of the row 2-norms.
pub fn mixed_norm_21(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).sum()
}

/// Singular value thresholding, the proximal map of `tau ||.||_*`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::Negative { name: "tau", value: tau });
    }
    let svd = thin_svd(m)?;
    let shrunk: Vec<f64> = svd.singular_values.iter().map(|s| (s - tau).max(0.0)).collect();
    Ok(scaled_product(&svd.left_vectors, &shrunk, &svd.right_vectors))
}

/// Row-wise group shrinkage, the proximal map of `kappa ||.||_{2,1}`.
pub fn row_group_shrink(m: &DMatrix<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    if !(kappa >= 0.0) {
        return Err(Error::Negative {
            name: "kappa",
            value: kappa,
        });
    }
    let mut out = m.clone();
    shrink_rows_in_place(&mut out, kappa);
    Ok(out)
}

pub(crate) fn shrink_rows_in_place(m: &mut DMatrix<f64>, kappa: f64) {
    for i in 0..m.nrows() {
        let norm = m.row(i).norm();
        let factor = if norm > kappa { 1.0 - kappa / norm } else { 0.0 };
        m.row_mut(i).scale_mut(factor);
    }
}

/// Componentwise clamp to `[-bound, bound]`.
pub fn box_clip(v: &DVector<f64>, bound: f64) -> DVector<f64> {
    let b = bound.max(0.0);
    v.map(|x| x.clamp(-b, b))
}

/// `D(i, :) = M(i, :) - M(i + 1, :)`.
pub fn row_diff(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "row differences need at least 2 rows, got {n}"
        )));
    }
    Ok(m.rows(0, n - 1) - m.rows(1, n - 1))
}

/// Adjoint of [`row_diff`]: maps an `(N-1) x c` matrix to `N x c`.
pub fn row_diff_adjoint(d: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, c) = d.shape();
    let mut out = DMatrix::zeros(k + 1, c);
    for i in 0..k {
        for j in 0..c {
            out[(i, j)] += d[(i, j)];
            out[(i + 1, j)] -= d[(i, j)];
        }
    }
    out
}
