use std::path::Path;

use bilarx_core::{ArxOrders, SolverOptions};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Flat JSON run configuration.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n_a: usize,
    pub n_b: usize,
    pub n_k: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    /// Sets both the primal and the dual tolerance.
    #[serde(default)]
    pub tol: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> CliResult<()> {
        let bad = |field: &str, v: f64| CliError::Usage(format!("config field `{field}` is invalid: {v}"));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(bad("epsilon", self.epsilon));
        }
        if let Some(l) = self.lambda.filter(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(bad("lambda", l));
        }
        if let Some(g) = self.gamma.filter(|g| !(*g >= 0.0)) {
            return Err(bad("gamma", g));
        }
        self.orders()?;
        self.solver_options()?;
        Ok(())
    }

    pub fn orders(&self) -> CliResult<ArxOrders> {
        ArxOrders::new(self.n_a, self.n_b, self.n_k).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn solver_options(&self) -> CliResult<SolverOptions> {
        let mut o = SolverOptions::default();
        if let Some(r) = self.rho {
            o.rho = r;
        }
        if let Some(m) = self.max_iters {
            o.max_iters = m;
        }
        if let Some(t) = self.tol {
            o.tol_primal = t;
            o.tol_dual = t;
        }
        o.validate().map_err(|e| CliError::Usage(format!("config: {e}")))?;
        Ok(o)
    }

    pub fn require_lambda(&self) -> CliResult<f64> {
        self.lambda
            .ok_or_else(|| CliError::Usage("config field `lambda` is required for this command".into()))
    }
}
