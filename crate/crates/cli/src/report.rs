//! JSON result documents.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use bilarx_core::{BilSolution, Diagnostics, NaiveEstimate, ProblemSpec, RipReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl From<&Diagnostics> for DiagnosticsReport {
    fn from(d: &Diagnostics) -> Self {
        Self {
            iterations: d.iterations,
            primal_residual: d.primal_residual,
            dual_residual: d.dual_residual,
            converged: d.converged,
        }
    }
}

/// A solved lifted program. `u` and `change_points` are keyed by series label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub lambda: f64,
    pub objective: f64,
    pub a: Vec<f64>,
    /// Unit norm, largest entry positive; absent when the solution is zero.
    pub b: Option<Vec<f64>>,
    /// `(u, b)` are only known up to a common scalar.
    pub scale_note: bool,
    pub u: BTreeMap<String, Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub rank_gap: f64,
    /// Threshold behind `change_points`, absent if none was configured.
    pub gamma: Option<f64>,
    pub change_points: Option<BTreeMap<String, Vec<usize>>>,
    pub max_abs_residual: f64,
    pub diagnostics: DiagnosticsReport,
}

impl SolutionReport {
    pub fn new(spec: &ProblemSpec, sol: &BilSolution, gamma: Option<f64>) -> CliResult<Self> {
        let labels = spec.sequences().iter().map(|s| s.label.clone());
        let u: BTreeMap<String, Vec<f64>> = labels.clone().zip(sol.u_est.iter().map(|u| u.as_slice().to_vec())).collect();
        let change_points = match gamma {
            Some(g) => Some(
                labels
                    .zip(&sol.u_est)
                    .map(|(l, u)| Ok((l, bilarx_core::change_points(u.as_slice(), g)?)))
                    .collect::<bilarx_core::Result<BTreeMap<_, _>>>()?,
            ),
            None => None,
        };
        Ok(Self {
            lambda: sol.lambda,
            objective: sol.objective,
            a: sol.a_est.as_slice().to_vec(),
            b: sol.b_est.as_ref().map(|b| b.as_slice().to_vec()),
            scale_note: true,
            u,
            singular_values: sol.singular_values.clone(),
            rank_gap: sol.rank_gap,
            gamma,
            change_points,
            max_abs_residual: sol.max_abs_residual(spec)?,
            diagnostics: (&sol.diagnostics).into(),
        })
    }

    /// Per-series inputs in the order of `spec`.
    pub fn inputs_for(&self, spec: &ProblemSpec) -> CliResult<Vec<Vec<f64>>> {
        spec.sequences()
            .iter()
            .map(|s| {
                let u = self
                    .u
                    .get(&s.label)
                    .ok_or_else(|| CliError::Usage(format!("result has no input for series `{}`", s.label)))?;
                if u.len() != s.len() {
                    return Err(CliError::Usage(format!(
                        "result input for `{}` has {} samples, data has {}",
                        s.label,
                        u.len(),
                        s.len()
                    )));
                }
                Ok(u.clone())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub gap_target: f64,
    pub qualified: bool,
    /// `[lambda, rank_gap]` per grid point.
    pub trace: Vec<(f64, f64)>,
    pub selected: SolutionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub segments: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub u: BTreeMap<String, Vec<f64>>,
    pub change_points: BTreeMap<String, Vec<usize>>,
}

impl BaselineReport {
    pub fn new(spec: &ProblemSpec, est: &NaiveEstimate, segments: usize) -> Self {
        let labels = || spec.sequences().iter().map(|s| s.label.clone());
        Self {
            segments,
            a: est.a.as_slice().to_vec(),
            b: est.b.as_slice().to_vec(),
            u: labels().zip(est.u_hat.iter().map(|u| u.as_slice().to_vec())).collect(),
            change_points: labels().zip(est.change_points.iter().cloned()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipCheckReport {
    pub k: usize,
    pub rip_epsilon: f64,
    pub rip_epsilon_2k: f64,
    pub patterns_checked: u64,
    pub certified_unique: bool,
}

impl From<&RipReport> for RipCheckReport {
    fn from(r: &RipReport) -> Self {
        Self {
            k: r.k,
            rip_epsilon: r.rip_epsilon,
            rip_epsilon_2k: r.rip_epsilon_2k,
            patterns_checked: r.patterns_checked,
            certified_unique: r.certified_unique,
        }
    }
}

/// Compact JSON with every float written to 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Usage(format!("cannot serialize result: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let text = to_json(value)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}"))),
    }
}

pub fn load_solution(path: &Path) -> CliResult<SolutionReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read result {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("result {}: {e}", path.display())))
}
