//! Out-of-sample performance metrics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tail level for VaR and CVaR.
pub const TAIL_LEVEL: f64 = 0.05;

pub const METRIC_NAMES: [&str; 10] = [
    "mean_return",
    "sd",
    "var_05",
    "cvar_05",
    "dd",
    "mean_cvar_ratio",
    "sharpe",
    "sortino",
    "mean_var_ratio",
    "turnover",
];

/// Concatenated out-of-sample returns of one model plus its rebalance weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OosSeries {
    pub returns: Vec<f64>,
    pub weights_history: Vec<DVector<f64>>,
}

impl OosSeries {
    /// Appends one out-of-sample block held at constant `weights`.
    pub fn push_window(
        &mut self,
        weights: &DVector<f64>,
        oos_returns: &DMatrix<f64>,
    ) -> Result<()> {
        if oos_returns.ncols() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                actual: oos_returns.ncols(),
            });
        }
        self.returns.extend((oos_returns * weights).iter());
        self.weights_history.push(weights.clone());
        Ok(())
    }
}

/// Table of the ten metrics. Risk figures are losses (positive = bad).
/// Ratios that are undefined (non-positive mean or risk) are NaN with
/// `degenerate_ratios` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub mean_return: f64,
    pub sd: f64,
    pub var_05: f64,
    pub cvar_05: f64,
    pub dd: f64,
    pub mean_cvar_ratio: f64,
    pub sharpe: f64,
    pub sortino: f64,
    pub mean_var_ratio: f64,
    pub turnover: f64,
    #[serde(skip)]
    pub degenerate_ratios: bool,
    /// Fewer than two rebalances, turnover reported as 0.
    #[serde(skip)]
    pub single_rebalance: bool,
}

impl MetricVector {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.mean_return,
            self.sd,
            self.var_05,
            self.cvar_05,
            self.dd,
            self.mean_cvar_ratio,
            self.sharpe,
            self.sortino,
            self.mean_var_ratio,
            self.turnover,
        ]
    }
}

pub fn compute_metrics(series: &OosSeries) -> Result<MetricVector> {
    let r = &series.returns;
    let n = r.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n,
        });
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite out-of-sample return".into()));
    }
    let nf = n as f64;
    let mean = r.iter().sum::<f64>() / nf;
    let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let dd = (r.iter().map(|x| x.min(0.0).powi(2)).sum::<f64>() / nf).sqrt();
    let (var, cvar) = tail_risk(r, TAIL_LEVEL);

    // risk figures at round-off level of the data count as zero
    let scale = r.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let risk_floor = 1e-12 * scale;
    let mut degenerate = false;
    let mut ratio = |risk: f64| {
        if mean > 0.0 && risk > risk_floor {
            mean / risk
        } else {
            degenerate = true;
            f64::NAN
        }
    };
    let mean_cvar_ratio = ratio(cvar);
    let sharpe = ratio(sd);
    let sortino = ratio(dd);
    let mean_var_ratio = ratio(var);

    Ok(MetricVector {
        mean_return: mean,
        sd,
        var_05: var,
        cvar_05: cvar,
        dd,
        mean_cvar_ratio,
        sharpe,
        sortino,
        mean_var_ratio,
        turnover: turnover(&series.weights_history),
        degenerate_ratios: degenerate,
        single_rebalance: series.weights_history.len() < 2,
    })
}

/// `(VaR, CVaR)` as losses: the k-th smallest return with `k = ceil(level·N)`
/// and the mean of all returns at or below it, both negated.
pub fn tail_risk(returns: &[f64], level: f64) -> (f64, f64) {
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let q = sorted[k - 1];
    let tail: Vec<f64> = sorted.iter().copied().take_while(|&x| x <= q).collect();
    let cvar = -tail.iter().sum::<f64>() / tail.len() as f64;
    (-q, cvar)
}

/// Mean L1 distance between consecutive weight vectors; 0 for fewer than two.
pub fn turnover(history: &[DVector<f64>]) -> f64 {
    if history.len() < 2 {
        return 0.0;
    }
    let total: f64 = history
        .windows(2)
        .map(|w| (&w[1] - &w[0]).abs().sum())
        .sum();
    total / (history.len() - 1) as f64
}
