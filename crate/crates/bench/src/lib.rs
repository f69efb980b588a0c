//! Fixtures shared by the benchmarks.

use bilarx_core::datagen::UniformStream;
use bilarx_core::MatrixOperator;
use nalgebra::DMatrix;

/// Deterministic matrix with entries in `[-1, 1)`.
pub fn fixture_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut g = UniformStream::new(seed);
    DMatrix::from_fn(rows, cols, |_, _| 2.0 * g.next_unit() - 1.0)
}

/// Random operator on `n1 x n2` matrices with `m` measurements.
pub fn fixture_operator(m: usize, n1: usize, n2: usize, seed: u64) -> MatrixOperator {
    let a = fixture_matrix(m, n1 * n2, seed) * (3.0 / m as f64).sqrt();
    MatrixOperator::new(a, n1, n2, 0).expect("consistent shape")
}
