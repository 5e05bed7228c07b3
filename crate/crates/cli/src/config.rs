use serde::{Deserialize, Serialize};

use crate::{Result, RunError};

pub const DESK_N_MEAN: f64 = 1e4;
pub const FULL_N_MEAN: f64 = 1e5;
pub const DEFAULT_ALPHA: f64 = 10.0;
/// Target for `Omega * n_max` when deriving the probe parameters from gamma.
pub const OMEGA_N_MAX: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Fig1,
    Fig2,
    QndDemo,
    QfiTable,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything needed to reproduce a run; echoed into JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Mean atom number for Monte Carlo records.
    pub n_mean: f64,
    /// Mean atom number for the analytic route.
    pub analytic_n_mean: f64,
    /// Total-number variance; `None` means equal to the mean.
    pub sigma2: Option<f64>,
    pub gamma_list: Vec<f64>,
    pub theta_grid: (f64, f64, usize),
    pub m: u64,
    pub records: u64,
    pub alpha: f64,
    pub omega_n_max: f64,
    pub seed: u64,
    pub format: Format,
}

impl ScenarioConfig {
    pub fn sigma2_for(&self, n_mean: f64) -> f64 {
        self.sigma2.unwrap_or(n_mean)
    }

    pub fn thetas(&self) -> Vec<f64> {
        let (lo, hi, count) = self.theta_grid;
        clock_squeeze::ramsey::linspace(lo, hi, count)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RunError::Config(msg));
        for (name, v) in [("nbar", self.n_mean), ("analytic nbar", self.analytic_n_mean)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(s2) = self.sigma2 {
            if !(s2 >= 0.0) || !s2.is_finite() {
                return bad(format!("sigma2 must be >= 0, got {s2}"));
            }
        }
        if self.gamma_list.is_empty() {
            return bad("gamma list is empty".into());
        }
        if let Some(g) = self.gamma_list.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return bad(format!("gamma must be >= 0, got {g}"));
        }
        let (lo, hi, count) = self.theta_grid;
        if count == 0 {
            return bad("theta grid is empty".into());
        }
        if !lo.is_finite() || !hi.is_finite() || (count > 1 && !(hi > lo)) {
            return bad(format!("theta grid [{lo}, {hi}] is not increasing"));
        }
        if self.m == 0 {
            return bad("m must be >= 1".into());
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.omega_n_max > 0.0) {
            return bad(format!("omega_n_max must be positive, got {}", self.omega_n_max));
        }
        Ok(())
    }
}

/// `count` points from `lo` to `hi`, evenly spaced in log.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    clock_squeeze::ramsey::linspace(lo.log10(), hi.log10(), count)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}
