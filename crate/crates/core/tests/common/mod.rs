#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::rngs::StdRng;
use rand::Rng;

use bilarx_core::{build_problem, ArxOrders, MatrixOperator, OutputSeries, ProblemSpec};

pub fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Uniform random operator scaled so that `E ||A z||^2 = ||z||^2`.
pub fn random_operator(rng: &mut StdRng, m: usize, n1: usize, n2: usize) -> MatrixOperator {
    let a = random_matrix(rng, m, n1 * n2) * (3.0 / m as f64).sqrt();
    MatrixOperator::new(a, n1, n2, 0).unwrap()
}

pub fn standard_normal(rng: &mut StdRng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `u b^T` with one level change after row `change` and positive `b`.
pub fn planted_rank_one(rng: &mut StdRng, n1: usize, n2: usize, change: usize) -> DMatrix<f64> {
    let lo = rng.random_range(-2.0..2.0);
    let hi = lo + rng.random_range(0.5..2.0);
    let u = DVector::from_fn(n1, |i, _| if i < change { lo } else { hi });
    let b = DVector::from_fn(n2, |_, _| rng.random_range(0.3..1.5));
    u * b.transpose()
}

/// Eigenvalues of a symmetric 3x3 matrix from its characteristic cubic, descending.
pub fn cubic_eigenvalues(g: &DMatrix<f64>) -> [f64; 3] {
    let p1 = g[(0, 1)].powi(2) + g[(0, 2)].powi(2) + g[(1, 2)].powi(2);
    let q = g.trace() / 3.0;
    let p2 = (g[(0, 0)] - q).powi(2) + (g[(1, 1)] - q).powi(2) + (g[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let b = (g - DMatrix::identity(3, 3) * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

/// Zooming grid search for the minimum of a function of `dim` variables.
pub fn zoom_minimize<F: Fn(&[f64]) -> f64>(f: F, center: &[f64], radius: f64, levels: usize) -> Vec<f64> {
    let dim = center.len();
    let pts: usize = if dim <= 2 { 41 } else { 11 };
    let mut c = center.to_vec();
    let mut r = radius;
    let mut best = f(&c);
    for _ in 0..levels {
        let h = 2.0 * r / (pts - 1) as f64;
        let base = c.clone();
        let total = pts.pow(dim as u32);
        let mut x = vec![0.0; dim];
        for idx in 0..total {
            let mut rem = idx;
            for d in 0..dim {
                x[d] = base[d] - r + h * (rem % pts) as f64;
                rem /= pts;
            }
            let v = f(&x);
            if v < best {
                best = v;
                c.copy_from_slice(&x);
            }
        }
        r = 3.0 * h;
    }
    c
}

/// Minimizer of `1/2 ||Z - M||^2 + tau ||Z||_*` over 2x2 matrices by direct search.
///
/// The search covers `Z = 0`, rank-one `Z = s p q^T` over a grid of unit
/// directions, and full-rank `Z` where the objective is smooth; the best of
/// the three candidates wins.
pub fn prox_nuclear_2x2_oracle(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let nuc = |z: &DMatrix<f64>| {
        let fro2 = z.norm_squared();
        let det = z[(0, 0)] * z[(1, 1)] - z[(0, 1)] * z[(1, 0)];
        (fro2 + 2.0 * det.abs()).max(0.0).sqrt()
    };
    let obj = |z: &DMatrix<f64>| 0.5 * (z - m).norm_squared() + tau * nuc(z);
    let mut cands = vec![DMatrix::zeros(2, 2)];

    // Rank one: for fixed directions the optimal scale is max(p^T M q - tau, 0).
    let rank1 = |ang: &[f64]| {
        let p = DVector::from_vec(vec![ang[0].cos(), ang[0].sin()]);
        let q = DVector::from_vec(vec![ang[1].cos(), ang[1].sin()]);
        let s = ((p.transpose() * m * &q)[0] - tau).max(0.0);
        (s, &p * q.transpose())
    };
    let mut best_r1: Option<Vec<f64>> = None;
    let mut best_val = f64::INFINITY;
    for i in 0..16 {
        for j in 0..32 {
            let start = [i as f64 * std::f64::consts::PI / 16.0, j as f64 * std::f64::consts::PI / 16.0];
            let v = {
                let (s, pq) = rank1(&start);
                obj(&(pq * s))
            };
            if v < best_val {
                best_val = v;
                best_r1 = Some(start.to_vec());
            }
        }
    }
    let ang = zoom_minimize(
        |a| {
            let (s, pq) = rank1(a);
            obj(&(pq * s))
        },
        &best_r1.unwrap(),
        0.2,
        40,
    );
    let (s, pq) = rank1(&ang);
    cands.push(pq * s);

    let full = zoom_minimize(
        |x| obj(&DMatrix::from_column_slice(2, 2, x)),
        m.as_slice(),
        m.amax() + tau + 1.0,
        60,
    );
    cands.push(DMatrix::from_column_slice(2, 2, &full));

    cands
        .into_iter()
        .min_by(|a, b| obj(a).total_cmp(&obj(b)))
        .unwrap()
}

/// Minimizer of `1/2 ||Z - M||^2 + kappa sum_i ||Z(i,:)||_2` for a 2x2 `M`, row by row.
pub fn prox_rows_2x2_oracle(m: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2, 2);
    for i in 0..2 {
        let row = [m[(i, 0)], m[(i, 1)]];
        let obj = |z: &[f64]| {
            0.5 * ((z[0] - row[0]).powi(2) + (z[1] - row[1]).powi(2)) + kappa * (z[0] * z[0] + z[1] * z[1]).sqrt()
        };
        let polar = |t: &[f64]| {
            let r = (row[0] * t[0].cos() + row[1] * t[0].sin() - kappa).max(0.0);
            [r * t[0].cos(), r * t[0].sin()]
        };
        let mut start = 0.0;
        let mut best = f64::INFINITY;
        for k in 0..64 {
            let t = k as f64 * std::f64::consts::PI / 32.0;
            let v = obj(&polar(&[t]));
            if v < best {
                best = v;
                start = t;
            }
        }
        let t = zoom_minimize(|t| obj(&polar(t)), &[start], 0.1, 30);
        let z = polar(&t);
        let z = if obj(&z) <= obj(&[0.0, 0.0]) { z } else { [0.0, 0.0] };
        out[(i, 0)] = z[0];
        out[(i, 1)] = z[1];
    }
    out
}

/// Least-squares segmentation cost by trying every set of breakpoints.
pub fn exhaustive_segmentation_cost(y: &[f64], max_segments: usize) -> f64 {
    let n = y.len();
    let cost = |s: usize, e: usize| {
        let mean = y[s..e].iter().sum::<f64>() / (e - s) as f64;
        y[s..e].iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    };
    let mut best = f64::INFINITY;
    // Bit i set means a boundary between samples i and i+1 (0-based).
    for mask in 0u32..(1 << (n - 1)) {
        if mask.count_ones() as usize + 1 > max_segments {
            continue;
        }
        let mut total = 0.0;
        let mut start = 0;
        for i in 0..n - 1 {
            if mask & (1 << i) != 0 {
                total += cost(start, i + 1);
                start = i + 1;
            }
        }
        total += cost(start, n);
        best = best.min(total);
    }
    best
}

/// A small random identification problem with exactly consistent data (`epsilon = 0`).
pub struct OracleInstance {
    pub spec: ProblemSpec,
    pub lambda: f64,
}

pub fn random_oracle_instance(rng: &mut StdRng) -> OracleInstance {
    let n = rng.random_range(8..=15);
    let n_a = rng.random_range(0..=1);
    let n_b = rng.random_range(1..=2);
    let n_k = rng.random_range(0..=1);
    let orders = ArxOrders::new(n_a, n_b, n_k).unwrap();
    let cp = rng.random_range(3..n - 3);
    let lo = rng.random_range(-1.0..1.0);
    let hi = lo + rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let u: Vec<f64> = (1..=n).map(|t| if t <= cp { lo } else { hi }).collect();
    let b: Vec<f64> = (0..n_b).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a: Vec<f64> = (0..n_a).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut y = vec![0.0; n];
    for t in 1..=n {
        let mut v = 0.0;
        for (k, bk) in b.iter().enumerate() {
            let i = t as isize - n_k as isize - (k as isize + 1);
            if i >= 1 {
                v += bk * u[i as usize - 1];
            }
        }
        for (k, ak) in a.iter().enumerate() {
            if t > k + 1 {
                v += ak * y[t - k - 2];
            }
        }
        y[t - 1] = v + rng.random_range(-0.05..0.05);
    }
    let spec = build_problem(vec![OutputSeries::new("y", y)], orders, 0.0).unwrap();
    OracleInstance {
        spec,
        lambda: rng.random_range(0.2..2.0),
    }
}

/// Result of the slow reference solver.
pub struct OracleSolution {
    pub x: DMatrix<f64>,
    pub a: DVector<f64>,
    pub objective: f64,
}

fn nuclear(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.sum()
}

fn diff_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.rows(0, x.nrows() - 1) - x.rows(1, x.nrows() - 1)
}

fn diff_rows_t(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows() + 1;
    let mut out = DMatrix::zeros(n, d.ncols());
    for i in 0..d.nrows() {
        for c in 0..d.ncols() {
            out[(i, c)] += d[(i, c)];
            out[(i + 1, c)] -= d[(i, c)];
        }
    }
    out
}

pub fn oracle_objective(x: &DMatrix<f64>, lambda: f64) -> f64 {
    let d = diff_rows(x);
    nuclear(x) + lambda * d.row_iter().map(|r| r.norm()).sum::<f64>()
}

/// Single-sequence `epsilon = 0` reference: FISTA with restarts on the
/// Moreau-smoothed objective, over the affine set of exact fits
/// parametrized by an orthonormal null-space basis. The smoothing parameter
/// is decreased in stages; `iterations` is the total iteration count.
pub fn smoothed_reference(spec: &ProblemSpec, lambda: f64, iterations: usize) -> OracleSolution {
    assert_eq!(spec.num_sequences(), 1);
    assert_eq!(spec.epsilon(), 0.0);
    let y = &spec.sequences()[0].samples;
    let n = y.len();
    let ArxOrders { n_a, n_b, n_k } = spec.orders();
    let first = spec.first_index();
    let rows = n + 1 - first;
    let p = n * n_b + n_a;

    // Constraint matrix written out from the model equation.
    let mut a_mat = DMatrix::zeros(rows, p);
    let mut rhs = DVector::zeros(rows);
    for r in 0..rows {
        let t = first + r;
        rhs[r] = y[t - 1];
        for k in 1..=n_b {
            let i = t - n_k - k;
            a_mat[(r, (k - 1) * n + (i - 1))] = 1.0;
        }
        for k in 1..=n_a {
            a_mat[(r, n * n_b + k - 1)] = y[t - k - 1];
        }
    }

    let v0 = a_mat.clone().pseudo_inverse(1e-12).unwrap() * &rhs;
    let eig = SymmetricEigen::new(a_mat.tr_mul(&a_mat));
    let scale = eig.eigenvalues.amax().max(1.0);
    let null_cols: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] <= 1e-10 * scale).collect();
    let basis = DMatrix::from_fn(p, null_cols.len(), |r, c| eig.eigenvectors[(r, null_cols[c])]);

    let unpack = |v: &DVector<f64>| {
        let x = DMatrix::from_column_slice(n, n_b, &v.as_slice()[..n * n_b]);
        let a = DVector::from_column_slice(&v.as_slice()[n * n_b..]);
        (x, a)
    };
    let smoothed_grad = |x: &DMatrix<f64>, mu: f64| {
        let svd = x.clone().svd(true, true);
        let shrunk = svd.singular_values.map(|s| (s - mu).max(0.0));
        let prox = svd.u.as_ref().unwrap() * DMatrix::from_diagonal(&shrunk) * svd.v_t.as_ref().unwrap();
        let mut g = (x - prox) / mu;
        let d = diff_rows(x);
        let mut gd = DMatrix::zeros(d.nrows(), d.ncols());
        for i in 0..d.nrows() {
            let nr = d.row(i).norm();
            let f = if nr <= lambda * mu { 1.0 / mu } else { lambda / nr };
            gd.set_row(i, &(d.row(i) * f));
        }
        g += diff_rows_t(&gd);
        g
    };
    let full_grad = |z: &DVector<f64>, mu: f64| {
        let v = &v0 + &basis * z;
        let (x, _) = unpack(&v);
        let gx = smoothed_grad(&x, mu);
        let mut gv = DVector::zeros(p);
        gv.rows_mut(0, n * n_b).copy_from_slice(gx.as_slice());
        basis.tr_mul(&gv)
    };
    let smoothed_obj = |z: &DVector<f64>, mu: f64| {
        let (x, _) = unpack(&(&v0 + &basis * z));
        let s = x.clone().svd(false, false).singular_values;
        let h: f64 = s.iter().map(|&s| if s <= mu { s * s / (2.0 * mu) } else { s - mu / 2.0 }).sum();
        let d = diff_rows(&x);
        let g: f64 = d
            .row_iter()
            .map(|r| {
                let nr = r.norm();
                if nr <= lambda * mu {
                    nr * nr / (2.0 * mu)
                } else {
                    lambda * nr - lambda * lambda * mu / 2.0
                }
            })
            .sum();
        h + g
    };

    let stages = 10;
    let per_stage = iterations / stages;
    let mut mu = 0.1 * rhs.amax().max(1e-3);
    let mut z = DVector::zeros(basis.ncols());
    for _ in 0..stages {
        let step = mu / 5.0;
        let mut zk = z.clone();
        let mut w = z.clone();
        let mut t = 1.0f64;
        let mut fk = smoothed_obj(&zk, mu);
        for _ in 0..per_stage {
            let znew = &w - full_grad(&w, mu) * step;
            let fnew = smoothed_obj(&znew, mu);
            if fnew > fk {
                // Function-value restart.
                t = 1.0;
                w = zk.clone();
                continue;
            }
            let tnew = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            w = &znew + (&znew - &zk) * ((t - 1.0) / tnew);
            zk = znew;
            fk = fnew;
            t = tnew;
        }
        z = zk;
        mu *= 0.3;
    }
    let (x, a) = unpack(&(&v0 + &basis * z));
    let objective = oracle_objective(&x, lambda);
    OracleSolution { x, a, objective }
}
