use nalgebra::DMatrix;

use crate::error::{Error, Result};

const OFF_DIAGONAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 50;

/// Eigenpairs of a real symmetric matrix, eigenvalues sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigenvalue iteration.
///
/// Sweeps stop once the off-diagonal Frobenius mass drops below
/// `1e-14 * ||G||_F`, or after 50 sweeps. Only the upper triangle is trusted to
/// be symmetric with the lower one; the input is symmetrized first.
pub fn symmetric_eigen(g: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", n, g.ncols())));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut a = (g + g.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();
    let mut sweeps = 0;

    while sweeps < MAX_SWEEPS {
        if off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * scale {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

// A <- J^T A J, V <- V J for the rotation J acting on coordinates (p, q).
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
