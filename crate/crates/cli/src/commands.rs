use std::path::{Path, PathBuf};

use bilarx_core::analysis::DEFAULT_PATTERN_BUDGET;
use bilarx_core::datagen::{scenario_with_seed, simulate_arx, DEFAULT_SEED};
use bilarx_core::solver::freeze_sets;
use bilarx_core::{
    build_lifted_operator, build_problem, naive_identify, rip_report, solve_bil, solve_refined, sweep_lambda,
    BilSolution, MatrixOperator, ProblemSpec,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::config::Config;
use crate::data::{fmt_f64, read_series, write_table};
use crate::error::{CliError, CliResult};
use crate::report::{emit, load_solution, BaselineReport, RipCheckReport, SolutionReport, SweepReport};

pub const SEED_ENV: &str = "BILARX_SEED";

#[derive(Debug, Parser)]
#[command(name = "bilarx", version, about = "Blind identification of ARX models with piecewise-constant inputs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the lifted program for the configured lambda.
    Identify(Common),
    /// Freeze small input differences of a previous result and re-solve.
    Refine {
        #[command(flatten)]
        common: Common,
        /// Result file written by `identify` or `sweep`.
        #[arg(long)]
        from: PathBuf,
        /// Overrides `gamma` from the config.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Scan a lambda grid for the first rank-one solution.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending grid, e.g. `1e2,1e3,1e4`.
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        gap_target: f64,
    },
    /// Two-step method: segment each output, then least squares.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        segments: usize,
    },
    /// Restricted isometry constants of the single-sequence operator.
    Ripcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_PATTERN_BUDGET)]
        budget: u64,
    },
    /// Generate a named scenario as CSV with columns t, z, y.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the planted inputs here.
        #[arg(long)]
        plot_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV with columns `t,y` or `t,y,series`.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub data: Option<PathBuf>,
    /// Use a generated scenario instead of a data file.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, requires = "scenario")]
    pub seed: Option<u64>,
    /// Result JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for plot-data CSVs.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
}

struct Loaded {
    config: Config,
    spec: ProblemSpec,
    true_inputs: Option<Vec<DVector<f64>>>,
}

fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn load(common: &Common) -> CliResult<Loaded> {
    let config = Config::load(&common.config)?;
    let orders = config.orders()?;
    let (series, true_inputs) = match (&common.data, &common.scenario) {
        (Some(path), None) => (read_series(path)?, None),
        (None, Some(name)) => {
            let s = scenario_with_seed(name, resolve_seed(common.seed)?)?;
            (s.spec.sequences().to_vec(), Some(s.truth.inputs))
        }
        _ => return Err(CliError::Usage("give exactly one of --data and --scenario".into())),
    };
    let spec = build_problem(series, orders, config.epsilon)?;
    Ok(Loaded { config, spec, true_inputs })
}

fn check_converged(sol: &BilSolution) -> CliResult<()> {
    if sol.diagnostics.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged { iterations: sol.diagnostics.iterations })
    }
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Measured vs simulated outputs and estimated (vs planted) inputs, per series.
fn write_plots(dir: &Path, loaded: &Loaded, a: &[f64], b: &[f64], inputs: &[Vec<f64>]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let spec = &loaded.spec;
    let orders = spec.orders();
    let a = DVector::from_column_slice(a);
    let b = DVector::from_column_slice(b);
    for (j, (seq, u)) in spec.sequences().iter().zip(inputs).enumerate() {
        let stem = file_stem(&seq.label);
        let sim = simulate_arx(&a, &b, orders, u, &vec![0.0; orders.n_a])?;
        write_table(
            &dir.join(format!("fit_{stem}.csv")),
            &["t", "y", "y_hat"],
            seq.samples
                .iter()
                .zip(&sim.z)
                .enumerate()
                .map(|(i, (y, z))| vec![(i + 1).to_string(), fmt_f64(*y), fmt_f64(*z)]),
        )?;
        let path = dir.join(format!("input_{stem}.csv"));
        match loaded.true_inputs.as_ref().map(|t| &t[j]) {
            Some(truth) => {
                // Estimated input rescaled by the least-squares scalar onto the planted one.
                let est = DVector::from_column_slice(u);
                let nn = est.norm_squared();
                let c = if nn > 0.0 { est.dot(truth) / nn } else { 0.0 };
                write_table(
                    &path,
                    &["t", "u_est", "u_true", "u_est_scaled"],
                    u.iter().zip(truth.iter()).enumerate().map(|(i, (e, t))| {
                        vec![(i + 1).to_string(), fmt_f64(*e), fmt_f64(*t), fmt_f64(c * e)]
                    }),
                )?;
            }
            None => write_table(
                &path,
                &["t", "u_est"],
                u.iter().enumerate().map(|(i, e)| vec![(i + 1).to_string(), fmt_f64(*e)]),
            )?,
        }
    }
    Ok(())
}

fn finish_solution(common: &Common, loaded: &Loaded, sol: &BilSolution, gamma: Option<f64>) -> CliResult<SolutionReport> {
    let report = SolutionReport::new(&loaded.spec, sol, gamma)?;
    if let (Some(dir), Some(b)) = (&common.plot_dir, &report.b) {
        let inputs: Vec<Vec<f64>> = sol.u_est.iter().map(|u| u.as_slice().to_vec()).collect();
        write_plots(dir, loaded, &report.a, b, &inputs)?;
    }
    Ok(report)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Identify(common) => {
            let loaded = load(&common)?;
            let lambda = loaded.config.require_lambda()?;
            let sol = solve_bil(&loaded.spec, lambda, &loaded.config.solver_options()?)?;
            let report = finish_solution(&common, &loaded, &sol, loaded.config.gamma)?;
            emit(&report, common.out.as_deref())?;
            check_converged(&sol)
        }
        Command::Refine { common, from, gamma } => {
            let loaded = load(&common)?;
            let gamma = gamma
                .or(loaded.config.gamma)
                .ok_or_else(|| CliError::Usage("refine needs --gamma or config field `gamma`".into()))?;
            if !(gamma >= 0.0) {
                return Err(CliError::Usage(format!("--gamma must be non-negative, got {gamma}")));
            }
            let previous = load_solution(&from)?;
            let inputs: Vec<DVector<f64>> = previous
                .inputs_for(&loaded.spec)?
                .into_iter()
                .map(DVector::from_vec)
                .collect();
            let sol = solve_refined(&loaded.spec, &freeze_sets(&inputs, gamma), &loaded.config.solver_options()?)?;
            let report = finish_solution(&common, &loaded, &sol, Some(gamma))?;
            emit(&report, common.out.as_deref())?;
            check_converged(&sol)
        }
        Command::Sweep { common, lambdas, gap_target } => {
            let loaded = load(&common)?;
            let out = sweep_lambda(&loaded.spec, &lambdas, gap_target, &loaded.config.solver_options()?)
                .map_err(|e| match e {
                    bilarx_core::Error::InvalidArgument(m) => CliError::Usage(m),
                    other => other.into(),
                })?;
            let selected = finish_solution(&common, &loaded, &out.solution, loaded.config.gamma)?;
            if let Some(dir) = &common.plot_dir {
                write_table(
                    &dir.join("sweep.csv"),
                    &["lambda", "rank_gap"],
                    out.trace.iter().map(|(l, g)| vec![fmt_f64(*l), fmt_f64(*g)]),
                )?;
            }
            let report = SweepReport { gap_target, qualified: out.qualified, trace: out.trace.clone(), selected };
            emit(&report, common.out.as_deref())?;
            check_converged(&out.solution)
        }
        Command::Baseline { common, segments } => {
            let loaded = load(&common)?;
            if segments == 0 {
                return Err(CliError::Usage("--segments must be at least 1".into()));
            }
            let est = naive_identify(&loaded.spec, segments)?;
            let report = BaselineReport::new(&loaded.spec, &est, segments);
            if let Some(dir) = &common.plot_dir {
                let inputs: Vec<Vec<f64>> = est.u_hat.iter().map(|u| u.as_slice().to_vec()).collect();
                write_plots(dir, &loaded, &report.a, &report.b, &inputs)?;
            }
            emit(&report, common.out.as_deref())
        }
        Command::Ripcheck { common, k, budget } => {
            let loaded = load(&common)?;
            if k == 0 {
                return Err(CliError::Usage("--k must be at least 1".into()));
            }
            let op = MatrixOperator::from_lifted(&build_lifted_operator(&loaded.spec))?;
            let report = rip_report(&op, k, budget)?;
            emit(&RipCheckReport::from(&report), common.out.as_deref())
        }
        Command::Simulate { scenario, seed, out, plot_dir } => {
            let s = scenario_with_seed(&scenario, resolve_seed(seed)?)?;
            let multi = s.spec.num_sequences() > 1;
            let mut header = vec!["t", "z", "y"];
            if multi {
                header.push("series");
            }
            let mut rows = Vec::new();
            for (seq, z) in s.spec.sequences().iter().zip(&s.truth.noise_free) {
                for (i, (y, z)) in seq.samples.iter().zip(z).enumerate() {
                    let mut row = vec![(i + 1).to_string(), fmt_f64(*z), fmt_f64(*y)];
                    if multi {
                        row.push(seq.label.clone());
                    }
                    rows.push(row);
                }
            }
            write_table(&out, &header, rows)?;
            if let Some(dir) = plot_dir {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
                for (seq, u) in s.spec.sequences().iter().zip(&s.truth.inputs) {
                    write_table(
                        &dir.join(format!("input_true_{}.csv", file_stem(&seq.label))),
                        &["t", "u"],
                        u.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), fmt_f64(*v)]),
                    )?;
                }
            }
            Ok(())
        }
    }
}
