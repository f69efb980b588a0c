//! Synthetic identification scenarios: piecewise-constant inputs, ARX
//! simulation and seeded uniform measurement noise.
//!
//! Noise comes from xoshiro256** seeded through SplitMix64
//! (`Xoshiro256StarStar::seed_from_u64`). Each draw takes the top 53 bits of
//! one 64-bit output, `r = (x >> 11) * 2^-53`, and maps it to
//! `bound * (2r - 1)`. Any implementation of those two generators reproduces
//! the noise bit for bit.

use nalgebra::{DMatrix, DVector};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::problem::{build_problem, ArxOrders, OutputSeries, ProblemSpec};

pub const SCENARIO_FIR_NOISEFREE: &str = "scenario_fir_noisefree";
pub const SCENARIO_ARX_NOISY: &str = "scenario_arx_noisy";
pub const SCENARIO_TWO_SEQUENCES: &str = "scenario_two_sequences";
pub const SCENARIO_NAMES: [&str; 3] = [SCENARIO_FIR_NOISEFREE, SCENARIO_ARX_NOISY, SCENARIO_TWO_SEQUENCES];

pub const DEFAULT_SEED: u64 = 1;

/// Planted quantities behind a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub inputs: Vec<DVector<f64>>,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    /// 1-based change points per input.
    pub change_points: Vec<Vec<usize>>,
    /// Noise-free outputs per sequence.
    pub noise_free: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub spec: ProblemSpec,
    pub truth: Truth,
    pub noise_bound: f64,
    pub seed: u64,
}

/// Output of [`simulate_arx`].
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// `z(1..N)`.
    pub z: Vec<f64>,
    /// Set when a pole of the autoregressive part has modulus `>= 1`.
    pub unstable: bool,
}

/// Piecewise-constant signal of length `n` switching level after each
/// 1-based index in `change_points`.
pub fn gen_piecewise_input(n: usize, change_points: &[usize], levels: &[f64]) -> Result<DVector<f64>> {
    if levels.len() != change_points.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} levels for {} change points",
            levels.len(),
            change_points.len()
        )));
    }
    if change_points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("change points must be strictly ascending".into()));
    }
    if let Some(&bad) = change_points.iter().find(|&&c| c == 0 || c >= n) {
        return Err(Error::InvalidArgument(format!(
            "change point {bad} outside [1, {}]",
            n.saturating_sub(1)
        )));
    }
    if levels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("adjacent levels must differ".into()));
    }
    let mut u = DVector::zeros(n);
    let mut seg = 0;
    for t in 1..=n {
        u[t - 1] = levels[seg];
        if seg < change_points.len() && t == change_points[seg] {
            seg += 1;
        }
    }
    Ok(u)
}

/// Runs the ARX recursion with `w = 0`:
/// `z(t) = sum_k a_k z(t-k) + sum_k b_k u(t-n_k-k)`.
///
/// Inputs before `t = 1` are zero; outputs before `t = 1` come from `y_init`,
/// where `y_init[k-1]` is `z(1-k)`.
pub fn simulate_arx(
    a: &DVector<f64>,
    b: &DVector<f64>,
    orders: ArxOrders,
    u: &[f64],
    y_init: &[f64],
) -> Result<Simulation> {
    if a.len() != orders.n_a || b.len() != orders.n_b {
        return Err(Error::Dimension(format!(
            "coefficient lengths ({}, {}) do not match orders ({}, {})",
            a.len(),
            b.len(),
            orders.n_a,
            orders.n_b
        )));
    }
    if y_init.len() != orders.n_a {
        return Err(Error::Dimension(format!(
            "y_init has {} values, expected {}",
            y_init.len(),
            orders.n_a
        )));
    }
    let n = u.len();
    let pre = orders.n_a;
    // z_ext[pre + t - 1] = z(t); z_ext[pre - k] = z(1 - k).
    let mut z_ext = vec![0.0; pre + n];
    for (k, v) in y_init.iter().enumerate() {
        z_ext[pre - 1 - k] = *v;
    }
    for t in 1..=n {
        let mut acc = 0.0;
        for k in 1..=orders.n_a {
            acc += a[k - 1] * z_ext[pre + t - 1 - k];
        }
        for k in 1..=orders.n_b {
            let s = t as isize - (orders.n_k + k) as isize;
            if s >= 1 {
                acc += b[k - 1] * u[s as usize - 1];
            }
        }
        z_ext[pre + t - 1] = acc;
    }
    Ok(Simulation {
        z: z_ext.split_off(pre),
        unstable: is_unstable(a),
    })
}

/// True when the polynomial `q^n - a_1 q^(n-1) - ... - a_n` has a root with modulus >= 1.
pub fn is_unstable(a: &DVector<f64>) -> bool {
    let n = a.len();
    if n == 0 {
        return false;
    }
    let mut companion = DMatrix::zeros(n, n);
    for k in 0..n {
        companion[(0, k)] = a[k];
    }
    for k in 1..n {
        companion[(k, k - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .any(|c| c.norm() >= 1.0 - 1e-12)
}

/// Uniform draws on `[0, 1)` from the documented generator.
pub struct UniformStream(Xoshiro256StarStar);

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// `y(t) = z(t) + e(t)` with `e ~ U(-bound, bound)`.
pub fn add_uniform_noise(z: &[f64], bound: f64, seed: u64) -> Result<Vec<f64>> {
    if !(bound >= 0.0) {
        return Err(Error::Negative { name: "noise bound", value: bound });
    }
    let mut rng = UniformStream::new(seed);
    Ok(z.iter()
        .map(|v| v + bound * (2.0 * rng.next_unit() - 1.0))
        .collect())
}

/// Named scenario with its default seed.
pub fn scenario(name: &str) -> Result<Scenario> {
    scenario_with_seed(name, DEFAULT_SEED)
}

/// Named scenario with an explicit noise seed.
///
/// * `scenario_fir_noisefree`: `N = 30`, FIR with `b = (-7.4111, -5.0782, -3.2058)`,
///   input levels `(0, 10, 4, 12)` switching after `t = 8, 15, 23`, `epsilon = 0`.
/// * `scenario_arx_noisy`: same input, `a = (0.2)`, `b = (-4.9594, 6.1774, 3.3930)`,
///   noise `U(-2, 2)`, `epsilon = 2`.
/// * `scenario_two_sequences`: two 40-sample records of one ARX system with
///   `a = (0.6)`, `b = (2, 1, 0.5)`, different inputs, noise `U(-0.05, 0.05)`
///   and `epsilon = 0.05`. Sequence `j` uses seed `seed + j`.
pub fn scenario_with_seed(name: &str, seed: u64) -> Result<Scenario> {
    let shared_input = || gen_piecewise_input(30, &[8, 15, 23], &[0.0, 10.0, 4.0, 12.0]);
    match name {
        SCENARIO_FIR_NOISEFREE => {
            let orders = ArxOrders::new(0, 3, 0)?;
            let b = DVector::from_vec(vec![-7.4111, -5.0782, -3.2058]);
            build(name, orders, DVector::zeros(0), b, vec![(shared_input()?, vec![8, 15, 23])], 0.0, 0.0, seed)
        }
        SCENARIO_ARX_NOISY => {
            let orders = ArxOrders::new(1, 3, 0)?;
            let a = DVector::from_vec(vec![0.2]);
            let b = DVector::from_vec(vec![-4.9594, 6.1774, 3.3930]);
            build(name, orders, a, b, vec![(shared_input()?, vec![8, 15, 23])], 2.0, 2.0, seed)
        }
        SCENARIO_TWO_SEQUENCES => {
            let orders = ArxOrders::new(1, 3, 0)?;
            let a = DVector::from_vec(vec![0.6]);
            let b = DVector::from_vec(vec![2.0, 1.0, 0.5]);
            let first = gen_piecewise_input(40, &[10, 25], &[0.0, 5.0, 0.0])?;
            let second = gen_piecewise_input(40, &[6, 18, 30], &[0.0, 3.0, 6.0, 0.0])?;
            build(
                name,
                orders,
                a,
                b,
                vec![(first, vec![10, 25]), (second, vec![6, 18, 30])],
                0.05,
                0.05,
                seed,
            )
        }
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

#[allow(clippy::too_many_arguments)]
fn build(
    name: &str,
    orders: ArxOrders,
    a: DVector<f64>,
    b: DVector<f64>,
    inputs: Vec<(DVector<f64>, Vec<usize>)>,
    noise_bound: f64,
    epsilon: f64,
    seed: u64,
) -> Result<Scenario> {
    let mut sequences = Vec::new();
    let mut noise_free = Vec::new();
    for (j, (u, _)) in inputs.iter().enumerate() {
        let sim = simulate_arx(&a, &b, orders, u.as_slice(), &vec![0.0; orders.n_a])?;
        let y = add_uniform_noise(&sim.z, noise_bound, seed.wrapping_add(j as u64))?;
        let label = if inputs.len() == 1 { "y".to_string() } else { format!("y{}", j + 1) };
        sequences.push(OutputSeries::new(label, y));
        noise_free.push(sim.z);
    }
    let spec = build_problem(sequences, orders, epsilon)?;
    let (inputs, change_points) = inputs.into_iter().unzip();
    Ok(Scenario {
        name: name.to_string(),
        spec,
        truth: Truth {
            inputs,
            a,
            b,
            change_points,
            noise_free,
        },
        noise_bound,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::change_points;

    #[test]
    fn piecewise_examples() {
        let u = gen_piecewise_input(6, &[3], &[0.0, 2.0]).unwrap();
        assert_eq!(u.as_slice(), &[0.0, 0.0, 0.0, 2.0, 2.0, 2.0]);
        let u = gen_piecewise_input(4, &[], &[1.5]).unwrap();
        assert_eq!(u.as_slice(), &[1.5; 4]);
        let u = gen_piecewise_input(6, &[2, 4], &[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 1.0, -1.0, -1.0, 1.0, 1.0]);
        assert_eq!(change_points(u.as_slice(), 0.0).unwrap(), vec![2, 4]);
    }

    #[test]
    fn piecewise_rejections() {
        assert!(gen_piecewise_input(6, &[4, 2], &[0.0, 1.0, 2.0]).is_err());
        assert!(gen_piecewise_input(6, &[6], &[0.0, 1.0]).is_err());
        assert!(gen_piecewise_input(6, &[0], &[0.0, 1.0]).is_err());
        assert!(gen_piecewise_input(6, &[3], &[1.0, 1.0]).is_err());
        assert!(gen_piecewise_input(6, &[3], &[1.0]).is_err());
    }

    #[test]
    fn fir_convolution_hand_check() {
        let orders = ArxOrders::new(0, 3, 1).unwrap();
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let u = [1.0, 10.0, 100.0, 1000.0, 0.0, 0.0];
        let z = simulate_arx(&DVector::zeros(0), &b, orders, &u, &[]).unwrap().z;
        // z(6) = b1 u(4) + b2 u(3) + b3 u(2)
        assert_eq!(z[5], 1000.0 + 200.0 + 30.0);
        assert_eq!(z[0], 0.0);
        assert_eq!(z[1], 0.0);
        assert_eq!(z[2], 1.0);
    }

    #[test]
    fn zero_input_zero_output() {
        let orders = ArxOrders::new(2, 2, 0).unwrap();
        let sim = simulate_arx(
            &DVector::from_vec(vec![0.5, -0.1]),
            &DVector::from_vec(vec![1.0, 1.0]),
            orders,
            &[0.0; 10],
            &[0.0, 0.0],
        )
        .unwrap();
        assert!(sim.z.iter().all(|&v| v == 0.0));
        assert!(!sim.unstable);
    }

    #[test]
    fn arx_step_response_by_recursion() {
        let orders = ArxOrders::new(1, 3, 0).unwrap();
        let a = DVector::from_vec(vec![0.2]);
        let b = DVector::from_vec(vec![-4.9594, 6.1774, 3.3930]);
        let z = simulate_arx(&a, &b, orders, &[1.0; 6], &[0.0]).unwrap().z;
        // z(1) = 0, z(2) = b1, z(3) = 0.2 z(2) + b1 + b2, z(4) = 0.2 z(3) + b1 + b2 + b3
        let z2 = -4.9594;
        let z3 = 0.2 * z2 + (-4.9594 + 6.1774);
        let z4 = 0.2 * z3 + (-4.9594 + 6.1774 + 3.3930);
        assert_eq!(z[0], 0.0);
        assert!((z[1] - z2).abs() < 1e-12);
        assert!((z[2] - z3).abs() < 1e-12);
        assert!((z[3] - z4).abs() < 1e-12);
    }

    #[test]
    fn presample_outputs_used() {
        let orders = ArxOrders::new(2, 1, 0).unwrap();
        let a = DVector::from_vec(vec![0.5, 0.25]);
        let z = simulate_arx(&a, &DVector::from_vec(vec![1.0]), orders, &[0.0; 3], &[4.0, 8.0])
            .unwrap()
            .z;
        assert_eq!(z[0], 0.5 * 4.0 + 0.25 * 8.0);
        assert_eq!(z[1], 0.5 * z[0] + 0.25 * 4.0);
    }

    #[test]
    fn unstable_flag() {
        assert!(is_unstable(&DVector::from_vec(vec![1.2])));
        assert!(!is_unstable(&DVector::from_vec(vec![0.2])));
        assert!(is_unstable(&DVector::from_vec(vec![0.0, 1.0])));
    }

    #[test]
    fn noise_bounds_and_determinism() {
        let z = vec![1.0; 200];
        assert_eq!(add_uniform_noise(&z, 0.0, 3).unwrap(), z);
        let y1 = add_uniform_noise(&z, 2.0, 11).unwrap();
        let y2 = add_uniform_noise(&z, 2.0, 11).unwrap();
        assert_eq!(y1, y2);
        assert!(y1.iter().all(|v| (v - 1.0).abs() <= 2.0));
        assert_ne!(y1, add_uniform_noise(&z, 2.0, 12).unwrap());
        assert!(add_uniform_noise(&z, -1.0, 1).is_err());
    }

    #[test]
    fn scenario_presets() {
        let s = scenario(SCENARIO_FIR_NOISEFREE).unwrap();
        assert_eq!(s.spec.epsilon(), 0.0);
        assert_eq!(s.truth.b.as_slice(), &[-7.4111, -5.0782, -3.2058]);
        assert_eq!(s.spec.sequences()[0].len(), 30);
        assert_eq!(s.spec.first_index(), 4);

        let s = scenario(SCENARIO_ARX_NOISY).unwrap();
        assert_eq!(s.spec.epsilon(), 2.0);
        assert_eq!(s.truth.a.as_slice(), &[0.2]);
        for (y, z) in s.spec.sequences()[0].samples.iter().zip(&s.truth.noise_free[0]) {
            assert!((y - z).abs() <= 2.0);
        }

        let s = scenario(SCENARIO_TWO_SEQUENCES).unwrap();
        assert_eq!(s.spec.num_sequences(), 2);
        assert_eq!(s.truth.inputs.len(), 2);

        assert!(matches!(scenario("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn scenarios_are_bit_reproducible() {
        for name in SCENARIO_NAMES {
            assert_eq!(scenario_with_seed(name, 42).unwrap(), scenario_with_seed(name, 42).unwrap());
        }
    }
}
