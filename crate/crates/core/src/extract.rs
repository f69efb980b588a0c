//! Rank-one factorization of the lifted matrix and change-point extraction.
//!
//! `(u, b)` are only determined up to a common scalar. The convention used
//! throughout is `||b||_2 = 1` with the largest-magnitude entry of `b`
//! positive, so all magnitude information ends up in `u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prox::thin_svd;

/// Rank-one model read off a solved lifted matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredModel {
    /// Input estimate per sequence.
    pub u_est: Vec<DVector<f64>>,
    /// Unit-norm shared input coefficients.
    pub b_est: DVector<f64>,
    pub a_est: DVector<f64>,
    pub rank_gap: f64,
    /// Singular values of the stacked lifted matrix.
    pub singular_values: Vec<f64>,
    /// Always true: `(u, b)` are known only up to a multiplicative scalar.
    pub scale_note: bool,
}

/// Stacks the blocks row-wise into one tall matrix.
pub fn stack_blocks(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Best rank-one approximation of the stacked blocks, `X_j ~ u_j b^T`.
///
/// `b` is the leading right singular vector and `u_j = X_j b`. Fails with
/// [`Error::NoIdentifiableComponent`] when every block is zero.
pub fn factor_rank1(x_blocks: &[DMatrix<f64>], a: &DVector<f64>) -> Result<FactoredModel> {
    if x_blocks.is_empty() {
        return Err(Error::NoIdentifiableComponent);
    }
    let cols = x_blocks[0].ncols();
    if x_blocks.iter().any(|b| b.ncols() != cols) {
        return Err(Error::Dimension("X blocks disagree on the column count".into()));
    }
    let stacked = stack_blocks(x_blocks);
    let svd = thin_svd(&stacked)?;
    let sigma1 = svd.singular_values.first().copied().unwrap_or(0.0);
    if !(sigma1 > 0.0) {
        return Err(Error::NoIdentifiableComponent);
    }
    let b_est: DVector<f64> = svd.right_vectors.column(0).into_owned();
    let u_est = x_blocks.iter().map(|x| x * &b_est).collect();
    Ok(FactoredModel {
        u_est,
        b_est,
        a_est: a.clone(),
        rank_gap: svd.rank_gap(),
        singular_values: svd.singular_values,
        scale_note: true,
    })
}

/// 1-based indices `i` with `|u(i) - u(i+1)| > gamma`, ascending.
pub fn change_points(u: &[f64], gamma: f64) -> Result<Vec<usize>> {
    if u.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "change points need at least 2 samples, got {}",
            u.len()
        )));
    }
    if !(gamma >= 0.0) {
        return Err(Error::Negative { name: "gamma", value: gamma });
    }
    Ok(u.windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - w[1]).abs() > gamma)
        .map(|(i, _)| i + 1)
        .collect())
}

/// Cosine of the angle between two vectors, 0 if either is zero.
pub fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(b) / (na * nb)
    }
}
