//! Two-step comparison method: fit a piecewise-constant signal to each output
//! record, take it as the input, then estimate the ARX coefficients by least
//! squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{ArxOrders, ProblemSpec};

/// Exact least-squares segmentation of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Piecewise-constant fit; each segment holds its sample mean.
    pub fitted: Vec<f64>,
    /// 1-based indices `i` where segment boundaries fall between `i` and `i + 1`.
    pub change_points: Vec<usize>,
    /// Sum of squared deviations from the fit.
    pub cost: f64,
}

impl Segmentation {
    pub fn num_segments(&self) -> usize {
        self.change_points.len() + 1
    }
}

/// Dynamic-programming `l0` segmentation with at most `max_segments` segments.
///
/// Among budgets reaching the same minimal cost the fewest segments win.
pub fn fit_piecewise_constant(y: &[f64], max_segments: usize) -> Result<Segmentation> {
    let n = y.len();
    if max_segments < 1 {
        return Err(Error::InvalidArgument("segment budget must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot segment an empty signal".into()));
    }
    if max_segments > n {
        return Err(Error::InvalidArgument(format!(
            "segment budget {max_segments} exceeds signal length {n}"
        )));
    }

    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, v) in y.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    // Samples start..end (0-based, end exclusive).
    let seg_cost = |start: usize, end: usize| {
        let len = (end - start) as f64;
        let sum = s1[end] - s1[start];
        (s2[end] - s2[start] - sum * sum / len).max(0.0)
    };

    let k_max = max_segments;
    let mut best = vec![vec![f64::INFINITY; n + 1]; k_max + 1];
    let mut arg = vec![vec![0usize; n + 1]; k_max + 1];
    for end in 1..=n {
        best[1][end] = seg_cost(0, end);
    }
    for k in 2..=k_max {
        for end in k..=n {
            for start in (k - 1)..end {
                let c = best[k - 1][start] + seg_cost(start, end);
                if c < best[k][end] {
                    best[k][end] = c;
                    arg[k][end] = start;
                }
            }
        }
    }

    let mut k_best = 1;
    for k in 2..=k_max {
        let tol = 1e-12 * (1.0 + best[k_best][n].abs());
        if best[k][n] < best[k_best][n] - tol {
            k_best = k;
        }
    }

    let mut bounds = vec![n];
    let mut end = n;
    for k in (2..=k_best).rev() {
        end = arg[k][end];
        bounds.push(end);
    }
    bounds.push(0);
    bounds.reverse();

    let mut fitted = vec![0.0; n];
    for w in bounds.windows(2) {
        let (start, end) = (w[0], w[1]);
        let mean = (s1[end] - s1[start]) / (end - start) as f64;
        fitted[start..end].iter_mut().for_each(|v| *v = mean);
    }
    let change_points = bounds[1..bounds.len() - 1].to_vec();
    Ok(Segmentation {
        fitted,
        change_points,
        cost: best[k_best][n],
    })
}

/// Least-squares ARX coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ArxEstimate {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    /// Sum of squared equation errors over `t = n..N`.
    pub residual_sum: f64,
}

/// Regressor matrix and targets for `t = n..N` of one record.
pub fn arx_regressors(y: &[f64], u: &[f64], orders: ArxOrders) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if y.len() != u.len() {
        return Err(Error::Dimension(format!(
            "output has {} samples, input has {}",
            y.len(),
            u.len()
        )));
    }
    let n = orders.first_index();
    if y.len() < n {
        return Err(Error::SequenceTooShort {
            label: "y".into(),
            len: y.len(),
            required: n,
        });
    }
    let rows = y.len() + 1 - n;
    let cols = orders.n_b + orders.n_a;
    let phi = DMatrix::from_fn(rows, cols, |r, c| {
        let t = n + r;
        if c < orders.n_b {
            u[t - orders.n_k - (c + 1) - 1]
        } else {
            y[t - (c - orders.n_b + 1) - 1]
        }
    });
    let target = DVector::from_fn(rows, |r, _| y[n + r - 1]);
    Ok((phi, target))
}

/// Minimizes `sum_t (y(t) - sum_k b_k u(t-k-n_k) - sum_k a_k y(t-k))^2`.
pub fn least_squares_arx(y: &[f64], u: &[f64], orders: ArxOrders) -> Result<ArxEstimate> {
    least_squares_arx_multi(&[(y, u)], orders)
}

/// Shared coefficients fitted jointly to several `(y, u)` records.
pub fn least_squares_arx_multi(records: &[(&[f64], &[f64])], orders: ArxOrders) -> Result<ArxEstimate> {
    if records.is_empty() {
        return Err(Error::NoSequences);
    }
    let mut blocks = Vec::with_capacity(records.len());
    for (y, u) in records {
        blocks.push(arx_regressors(y, u, orders)?);
    }
    let rows: usize = blocks.iter().map(|(p, _)| p.nrows()).sum();
    let cols = orders.n_a + orders.n_b;
    let mut phi = DMatrix::zeros(rows, cols);
    let mut target = DVector::zeros(rows);
    let mut r = 0;
    for (p, t) in &blocks {
        phi.rows_mut(r, p.nrows()).copy_from(p);
        target.rows_mut(r, t.len()).copy_from(t);
        r += p.nrows();
    }
    if rows < cols {
        return Err(Error::RankDeficient(format!(
            "{rows} equations for {cols} coefficients"
        )));
    }

    let svd = phi.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cutoff = 1e-12 * s_max.max(f64::MIN_POSITIVE) * rows.max(cols) as f64;
    if !(s_max > 0.0) || s_min <= cutoff {
        let which = if u_block_is_zero(&phi, orders.n_b) {
            "input regressors are identically zero".to_string()
        } else {
            format!("smallest singular value {s_min:.3e} of regressor matrix is below {cutoff:.3e}")
        };
        return Err(Error::RankDeficient(which));
    }
    let theta = svd
        .solve(&target, cutoff)
        .map_err(|e| Error::Factorization(e.to_string()))?;
    let residual_sum = (&target - &phi * &theta).norm_squared();
    Ok(ArxEstimate {
        b: theta.rows(0, orders.n_b).into_owned(),
        a: theta.rows(orders.n_b, orders.n_a).into_owned(),
        residual_sum,
    })
}

fn u_block_is_zero(phi: &DMatrix<f64>, n_b: usize) -> bool {
    phi.columns(0, n_b).iter().all(|&v| v == 0.0)
}

/// Result of the two-step method.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveEstimate {
    pub a: DVector<f64>,
    /// Least-squares input coefficients on the scale of `u_hat`.
    pub b: DVector<f64>,
    /// Piecewise-constant fit of each output, used directly as the input.
    pub u_hat: Vec<DVector<f64>>,
    pub change_points: Vec<Vec<usize>>,
    pub segmentations: Vec<Segmentation>,
}

/// Segments each output with at most `max_segments` pieces, copies the fit onto
/// the input axis unchanged and solves one stacked least-squares problem.
pub fn naive_identify(spec: &ProblemSpec, max_segments: usize) -> Result<NaiveEstimate> {
    let segmentations = spec
        .sequences()
        .iter()
        .map(|s| fit_piecewise_constant(&s.samples, max_segments))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<(&[f64], &[f64])> = spec
        .sequences()
        .iter()
        .zip(&segmentations)
        .map(|(s, seg)| (s.samples.as_slice(), seg.fitted.as_slice()))
        .collect();
    let est = least_squares_arx_multi(&records, spec.orders())?;
    Ok(NaiveEstimate {
        a: est.a,
        b: est.b,
        u_hat: segmentations
            .iter()
            .map(|s| DVector::from_column_slice(&s.fitted))
            .collect(),
        change_points: segmentations.iter().map(|s| s.change_points.clone()).collect(),
        segmentations,
    })
}
