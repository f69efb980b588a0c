//! Identification instances and the lifted constraint operator.
//!
//! An ARX model with orders `(n_a, n_b, n_k)`
//!
//! ```text
//! y(t) - a_1 y(t-1) - ... - a_na y(t-n_a) = b_1 u(t-n_k-1) + ... + b_nb u(t-n_k-n_b) + w(t)
//! ```
//!
//! becomes linear in the lifted matrix `X = u b^T` (one `N x n_b` block per
//! sequence) and the autoregressive coefficients `a`:
//!
//! ```text
//! y(t) = sum_k X(t-n_k-k, k) + sum_k a_k y(t-k) + w(t),   t = n..N,   |w(t)| <= epsilon
//! ```
//!
//! with `n = max(n_a, n_k + n_b) + 1`. Every time index, row index and column
//! index exposed by this module is 1-based. Sequence indices are positions in
//! [`ProblemSpec::sequences`] and start at 0.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Orders of a single-input single-output ARX model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArxOrders {
    /// Autoregressive order.
    pub n_a: usize,
    /// Number of input coefficients, at least one.
    pub n_b: usize,
    /// Input delay.
    pub n_k: usize,
}

impl ArxOrders {
    pub fn new(n_a: usize, n_b: usize, n_k: usize) -> Result<Self> {
        if n_b == 0 {
            return Err(Error::InvalidOrders("n_b must be at least 1".into()));
        }
        Ok(Self { n_a, n_b, n_k })
    }

    /// First constrained time index, `max(n_a, n_k + n_b) + 1`.
    pub fn first_index(&self) -> usize {
        self.n_a.max(self.n_k + self.n_b) + 1
    }
}

/// One measured output sequence `y(1..N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSeries {
    pub label: String,
    pub samples: Vec<f64>,
}

impl OutputSeries {
    pub fn new(label: impl Into<String>, samples: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `y(t)` with 1-based `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.samples[t - 1]
    }
}

/// A validated identification instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    sequences: Vec<OutputSeries>,
    orders: ArxOrders,
    epsilon: f64,
    first_index: usize,
}

/// Validates the sequences against the orders and the noise bound.
pub fn build_problem(
    sequences: Vec<OutputSeries>,
    orders: ArxOrders,
    epsilon: f64,
) -> Result<ProblemSpec> {
    if orders.n_b == 0 {
        return Err(Error::InvalidOrders("n_b must be at least 1".into()));
    }
    if sequences.is_empty() {
        return Err(Error::NoSequences);
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Negative {
            name: "epsilon",
            value: epsilon,
        });
    }
    let required = orders.first_index();
    for seq in &sequences {
        if seq.len() < required {
            return Err(Error::SequenceTooShort {
                label: seq.label.clone(),
                len: seq.len(),
                required,
            });
        }
        if let Some(pos) = seq.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                label: seq.label.clone(),
                t: pos + 1,
            });
        }
    }
    Ok(ProblemSpec {
        sequences,
        orders,
        epsilon,
        first_index: required,
    })
}

impl ProblemSpec {
    pub fn sequences(&self) -> &[OutputSeries] {
        &self.sequences
    }

    pub fn orders(&self) -> ArxOrders {
        self.orders
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// First constrained time index `n`.
    pub fn first_index(&self) -> usize {
        self.first_index
    }

    pub fn num_sequences(&self) -> usize {
        self.sequences.len()
    }

    /// Number of constraint rows contributed by sequence `j`, `N_j - n + 1`.
    pub fn constraints_in(&self, j: usize) -> usize {
        self.sequences[j].len() + 1 - self.first_index
    }

    pub fn total_constraints(&self) -> usize {
        (0..self.num_sequences()).map(|j| self.constraints_in(j)).sum()
    }

    pub fn max_abs_output(&self) -> f64 {
        self.sequences
            .iter()
            .flat_map(|s| s.samples.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Same orders and sequences with a different noise bound.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        build_problem(self.sequences.clone(), self.orders, epsilon)
    }

    /// Number of entries in the lifted `(X, a)` vector.
    pub fn lifted_dim(&self) -> usize {
        let nb = self.orders.n_b;
        self.sequences.iter().map(|s| s.len() * nb).sum::<usize>() + self.orders.n_a
    }

    /// Feasibility slack used for returned solutions, `1e-6 (1 + max|y|)`.
    pub fn feasibility_tolerance(&self) -> f64 {
        1e-6 * (1.0 + self.max_abs_output())
    }
}

/// Decision variables of the lifted program.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVariables {
    /// One `N_j x n_b` block per sequence.
    pub x_blocks: Vec<DMatrix<f64>>,
    /// Autoregressive coefficients `a_1..a_na`.
    pub a: DVector<f64>,
    /// Slack `w(n..N_j)` per sequence.
    pub w_blocks: Vec<DVector<f64>>,
}

impl LiftedVariables {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        let nb = spec.orders.n_b;
        Self {
            x_blocks: spec
                .sequences
                .iter()
                .map(|s| DMatrix::zeros(s.len(), nb))
                .collect(),
            a: DVector::zeros(spec.orders.n_a),
            w_blocks: (0..spec.num_sequences())
                .map(|j| DVector::zeros(spec.constraints_in(j)))
                .collect(),
        }
    }

    /// Planted variables `X_j = u_j b^T` with zero slack.
    pub fn planted(spec: &ProblemSpec, inputs: &[DVector<f64>], a: &DVector<f64>, b: &DVector<f64>) -> Result<Self> {
        if inputs.len() != spec.num_sequences() {
            return Err(Error::Dimension(format!(
                "{} planted inputs for {} sequences",
                inputs.len(),
                spec.num_sequences()
            )));
        }
        let mut vars = Self::zeros(spec);
        vars.a = a.clone();
        for (j, u) in inputs.iter().enumerate() {
            vars.x_blocks[j] = u * b.transpose();
        }
        vars.check_dims(spec)?;
        Ok(vars)
    }

    pub fn check_dims(&self, spec: &ProblemSpec) -> Result<()> {
        let nb = spec.orders.n_b;
        if self.x_blocks.len() != spec.num_sequences() {
            return Err(Error::Dimension(format!(
                "{} X blocks for {} sequences",
                self.x_blocks.len(),
                spec.num_sequences()
            )));
        }
        for (j, (x, s)) in self.x_blocks.iter().zip(&spec.sequences).enumerate() {
            if x.nrows() != s.len() || x.ncols() != nb {
                return Err(Error::Dimension(format!(
                    "X block {j} is {}x{}, expected {}x{nb}",
                    x.nrows(),
                    x.ncols(),
                    s.len()
                )));
            }
        }
        if self.a.len() != spec.orders.n_a {
            return Err(Error::Dimension(format!(
                "a has length {}, expected {}",
                self.a.len(),
                spec.orders.n_a
            )));
        }
        Ok(())
    }
}

/// Per-constraint residuals `r_j(t) = y_j(t) - sum X-terms - sum a-terms`, for
/// `t = n..N_j`. Setting `w = r` makes the equality constraints hold, so the
/// variables are feasible iff `max |r| <= epsilon`.
pub fn residual(spec: &ProblemSpec, vars: &LiftedVariables) -> Result<Vec<DVector<f64>>> {
    vars.check_dims(spec)?;
    let ArxOrders { n_a, n_b, n_k } = spec.orders;
    let n = spec.first_index;
    let out = spec
        .sequences
        .iter()
        .zip(&vars.x_blocks)
        .map(|(seq, x)| {
            DVector::from_iterator(
                seq.len() + 1 - n,
                (n..=seq.len()).map(|t| {
                    let mut r = seq.at(t);
                    for k in 1..=n_b {
                        r -= x[(t - n_k - k - 1, k - 1)];
                    }
                    for k in 1..=n_a {
                        r -= vars.a[k - 1] * seq.at(t - k);
                    }
                    r
                }),
            )
        })
        .collect();
    Ok(out)
}

/// Largest absolute residual over every sequence.
pub fn max_abs_residual(spec: &ProblemSpec, vars: &LiftedVariables) -> Result<f64> {
    Ok(residual(spec, vars)?
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// A constraint row: sequence `sequence` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConstraintRow {
    pub sequence: usize,
    pub t: usize,
}

/// What a column of the lifted operator multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LiftedColumn {
    /// Entry `X_sequence(row, col)`.
    X { sequence: usize, row: usize, col: usize },
    /// Autoregressive coefficient `a_lag`.
    A { lag: usize },
}

/// One structural nonzero of the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorEntry {
    pub row: usize,
    pub column: usize,
    pub value: f64,
}

/// Dense matrix form of the equality constraints, `rhs = matrix * [vec X; a] + w`.
///
/// Columns are ordered sequence by sequence, each `X_j` vectorized column-major,
/// followed by `a`.
#[derive(Debug, Clone)]
pub struct LiftedOperator {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub rows: Vec<ConstraintRow>,
    pub columns: Vec<LiftedColumn>,
    pub entries: Vec<OperatorEntry>,
    block_offsets: Vec<usize>,
    block_rows: Vec<usize>,
    n_b: usize,
}

pub fn build_lifted_operator(spec: &ProblemSpec) -> LiftedOperator {
    let ArxOrders { n_a, n_b, n_k } = spec.orders;
    let n = spec.first_index;

    let mut columns = Vec::with_capacity(spec.lifted_dim());
    let mut block_offsets = Vec::with_capacity(spec.num_sequences());
    let mut block_rows = Vec::with_capacity(spec.num_sequences());
    for (j, seq) in spec.sequences.iter().enumerate() {
        block_offsets.push(columns.len());
        block_rows.push(seq.len());
        for col in 1..=n_b {
            for row in 1..=seq.len() {
                columns.push(LiftedColumn::X { sequence: j, row, col });
            }
        }
    }
    let a_offset = columns.len();
    columns.extend((1..=n_a).map(|lag| LiftedColumn::A { lag }));

    let mut rows = Vec::with_capacity(spec.total_constraints());
    let mut rhs = Vec::with_capacity(spec.total_constraints());
    let mut entries = Vec::new();
    for (j, seq) in spec.sequences.iter().enumerate() {
        let len = seq.len();
        for t in n..=len {
            let r = rows.len();
            rows.push(ConstraintRow { sequence: j, t });
            rhs.push(seq.at(t));
            for k in 1..=n_b {
                let x_row = t - n_k - k;
                entries.push(OperatorEntry {
                    row: r,
                    column: block_offsets[j] + (k - 1) * len + (x_row - 1),
                    value: 1.0,
                });
            }
            for k in 1..=n_a {
                entries.push(OperatorEntry {
                    row: r,
                    column: a_offset + k - 1,
                    value: seq.at(t - k),
                });
            }
        }
    }

    let mut matrix = DMatrix::zeros(rows.len(), columns.len());
    for e in &entries {
        matrix[(e.row, e.column)] += e.value;
    }

    LiftedOperator {
        matrix,
        rhs: DVector::from_vec(rhs),
        rows,
        columns,
        entries,
        block_offsets,
        block_rows,
        n_b,
    }
}

impl LiftedOperator {
    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Column offset of the `a` coefficients.
    /// Row count of each `X` block.
    pub fn x_block_rows(&self) -> &[usize] {
        &self.block_rows
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn a_offset(&self) -> usize {
        self.block_offsets
            .last()
            .zip(self.block_rows.last())
            .map(|(o, r)| o + r * self.n_b)
            .unwrap_or(0)
    }

    /// Flattens `(X, a)` in column order.
    pub fn vectorize(&self, x_blocks: &[DMatrix<f64>], a: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.num_cols());
        for (j, x) in x_blocks.iter().enumerate() {
            let off = self.block_offsets[j];
            v.rows_mut(off, x.len()).copy_from_slice(x.as_slice());
        }
        let ao = self.a_offset();
        v.rows_mut(ao, a.len()).copy_from(a);
        v
    }

    /// Inverse of [`vectorize`](Self::vectorize).
    pub fn unvectorize(&self, v: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let blocks = self
            .block_offsets
            .iter()
            .zip(&self.block_rows)
            .map(|(&off, &rows)| {
                DMatrix::from_column_slice(rows, self.n_b, &v.as_slice()[off..off + rows * self.n_b])
            })
            .collect();
        let ao = self.a_offset();
        let a = v.rows(ao, self.num_cols() - ao).into_owned();
        (blocks, a)
    }

    /// `A(X, a)`, the model prediction for every constraint row.
    pub fn apply(&self, x_blocks: &[DMatrix<f64>], a: &DVector<f64>) -> DVector<f64> {
        &self.matrix * self.vectorize(x_blocks, a)
    }

    /// `A^T z` split back into `(X, a)` components.
    pub fn adjoint(&self, z: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        self.unvectorize(&(self.matrix.tr_mul(z)))
    }
}
