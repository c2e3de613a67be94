//! Efficiency, stability and safety metrics over paired experiments.
//!
//! With `τ_i = t_a / t_h` per pair: `μ` is the mean of `τ`, `c_v` the
//! population standard deviation of `τ` over `μ`, and `κ` the fraction of
//! experiments in which the automated vehicle crashed.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Outcome, PairedResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no experiments to evaluate")]
    Empty,
    #[error("pair {index}: passing times must be positive (t_a = {t_a}, t_h = {t_h})")]
    Malformed { index: usize, t_a: f64, t_h: f64 },
    #[error("cannot serialize report: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Outcome of one experiment as seen by the metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub t_a: f64,
    pub t_h: f64,
    pub av: Outcome,
    pub human: Outcome,
}

impl From<&PairedResult> for PairOutcome {
    fn from(p: &PairedResult) -> Self {
        Self { t_a: p.av.passing_time, t_h: p.human.passing_time, av: p.av.outcome, human: p.human.outcome }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gates {
    pub mu_0: f64,
    pub kappa_0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateVerdict {
    pub mu_0: f64,
    pub kappa_0: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub experiments: usize,
    /// Experiments whose automated-vehicle episode crashed.
    pub crashes: usize,
    /// Experiments left out of the `τ` statistics (crash or timeout in either pass).
    pub excluded: usize,
    pub av_timeouts: usize,
    pub human_crashes: usize,
    pub human_timeouts: usize,
    /// Absent when every experiment was excluded.
    pub mu: Option<f64>,
    pub cv: Option<f64>,
    pub kappa: f64,
    pub gates: Option<GateVerdict>,
    pub tau: Vec<f64>,
    pub running_mean: Vec<f64>,
}

/// Builds the report. A pair enters the `τ` statistics only when both passes
/// cleared the crossing; every experiment counts towards `κ`.
pub fn compute_report(pairs: &[PairOutcome], gates: Option<Gates>) -> Result<EvaluationReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut tau = Vec::with_capacity(pairs.len());
    let count = |f: &dyn Fn(&PairOutcome) -> bool| pairs.iter().filter(|p| f(p)).count();
    for (index, p) in pairs.iter().enumerate() {
        if p.av != Outcome::Cleared || p.human != Outcome::Cleared {
            continue;
        }
        if !(p.t_a > 0.0 && p.t_h > 0.0) {
            return Err(EvalError::Malformed { index, t_a: p.t_a, t_h: p.t_h });
        }
        tau.push(p.t_a / p.t_h);
    }
    let running_mean: Vec<f64> = tau
        .iter()
        .scan(0.0, |sum, t| {
            *sum += t;
            Some(*sum)
        })
        .enumerate()
        .map(|(i, s)| s / (i + 1) as f64)
        .collect();
    let (mu, cv) = if tau.is_empty() {
        (None, None)
    } else {
        let n = tau.len() as f64;
        let mu = tau.iter().sum::<f64>() / n;
        let sd = (tau.iter().map(|t| (t - mu).powi(2)).sum::<f64>() / n).sqrt();
        (Some(mu), Some(sd / mu))
    };
    let crashes = count(&|p| p.av == Outcome::Crashed);
    let kappa = crashes as f64 / pairs.len() as f64;
    let gates = gates.map(|g| GateVerdict {
        mu_0: g.mu_0,
        kappa_0: g.kappa_0,
        pass: mu.is_some_and(|m| m < g.mu_0) && kappa < g.kappa_0,
    });
    Ok(EvaluationReport {
        experiments: pairs.len(),
        crashes,
        excluded: pairs.len() - tau.len(),
        av_timeouts: count(&|p| p.av == Outcome::TimedOut),
        human_crashes: count(&|p| p.human == Outcome::Crashed),
        human_timeouts: count(&|p| p.human == Outcome::TimedOut),
        mu,
        cv,
        kappa,
        gates,
        tau,
        running_mean,
    })
}

impl EvaluationReport {
    /// `None` when no gates were configured.
    pub fn passed(&self) -> Option<bool> {
        self.gates.map(|g| g.pass)
    }

    pub fn to_toml_string(&self) -> Result<String, EvalError> {
        Ok(toml::to_string(self)?)
    }

    pub fn write_toml(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_toml_string()?)
            .map_err(|source| EvalError::Io { path: path.display().to_string(), source })
    }

    /// Plot-ready series with header `n,running_mean,tau`, `n` starting at 1.
    pub fn write_series<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "running_mean", "tau"])?;
        for (i, (m, t)) in self.running_mean.iter().zip(&self.tau).enumerate() {
            w.write_record([(i + 1).to_string(), m.to_string(), t.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
