//! Long-only portfolio models over the unit simplex.
//!
//! MV and GMV are quadratic programs fed by the shrinkage estimators; SMAD,
//! CVaR and MiniMax are scenario LPs with uniform scenario probabilities.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cov_shrinkage::{CovEstimate, CovKind};
use crate::mean_shrinkage::{MeanEstimate, MeanKind};
use crate::numerics::{solve_lp, solve_qp, LpProblem, LpStatus, QpProblem, Sense};
use crate::{Error, Result};

/// Weights below this are treated as solver dust.
pub const WEIGHT_FLOOR: f64 = 1e-9;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_ALPHA_CVAR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub weights: DVector<f64>,
    pub model_tag: String,
    /// Optimal objective value in the model's own convention.
    pub objective: f64,
}

/// One portfolio model. The two classical benchmarks reuse the MV/GMV
/// programs with sample estimates but carry their own tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelSpec {
    Mv { cov: CovKind, mean: MeanKind },
    Gmv { cov: CovKind },
    ClassicalMv,
    ClassicalGmv,
    Smad,
    Cvar,
    Minimax,
}

impl ModelSpec {
    pub const BENCHMARKS: [ModelSpec; 5] = [
        ModelSpec::ClassicalMv,
        ModelSpec::ClassicalGmv,
        ModelSpec::Smad,
        ModelSpec::Cvar,
        ModelSpec::Minimax,
    ];

    pub fn tag(&self) -> String {
        match self {
            ModelSpec::Mv { cov, mean } => format!("{cov}+{mean}"),
            ModelSpec::Gmv { cov } => format!("GMV+{cov}"),
            ModelSpec::ClassicalMv => "MV".into(),
            ModelSpec::ClassicalGmv => "GMV".into(),
            ModelSpec::Smad => "SMAD".into(),
            ModelSpec::Cvar => "CVaR".into(),
            ModelSpec::Minimax => "MM".into(),
        }
    }

    pub fn is_benchmark(&self) -> bool {
        !matches!(self, ModelSpec::Mv { .. } | ModelSpec::Gmv { .. })
    }

    /// Inverse of [`ModelSpec::tag`].
    pub fn from_tag(tag: &str) -> Result<Self> {
        let spec = match tag {
            "MV" => ModelSpec::ClassicalMv,
            "GMV" => ModelSpec::ClassicalGmv,
            "SMAD" => ModelSpec::Smad,
            "CVaR" => ModelSpec::Cvar,
            "MM" => ModelSpec::Minimax,
            _ => match tag.split_once('+') {
                Some(("GMV", cov)) => ModelSpec::Gmv { cov: cov.parse()? },
                Some((cov, mean)) => ModelSpec::Mv {
                    cov: cov.parse()?,
                    mean: mean.parse()?,
                },
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown model tag '{tag}'"
                    )))
                }
            },
        };
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Risk aversion γ of the MV model.
    pub gamma: f64,
    /// CVaR tail level α.
    pub alpha_cvar: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            alpha_cvar: DEFAULT_ALPHA_CVAR,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.alpha_cvar > 0.0 && self.alpha_cvar < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CVaR level must lie in (0, 1), got {}",
                self.alpha_cvar
            )));
        }
        Ok(())
    }
}

/// `max μᵀx − γ xᵀΣx` over the simplex, solved as `min γ xᵀΣx − μᵀx`.
pub fn solve_mv(mu: &MeanEstimate, sigma: &CovEstimate, gamma: f64) -> Result<Portfolio> {
    let tag = ModelSpec::Mv {
        cov: sigma.kind,
        mean: mu.kind,
    }
    .tag();
    mv_weights(&mu.mu, &sigma.sigma, gamma, tag)
}

/// `min xᵀΣx` over the simplex.
pub fn solve_gmv(sigma: &CovEstimate) -> Result<Portfolio> {
    let tag = ModelSpec::Gmv { cov: sigma.kind }.tag();
    gmv_weights(&sigma.sigma, tag)
}

pub(crate) fn mv_weights(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    gamma: f64,
    tag: String,
) -> Result<Portfolio> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if mu.len() != sigma.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            actual: mu.len(),
        });
    }
    let qp = QpProblem::new(sigma * gamma, -mu);
    let sol = solve_qp(&qp)?;
    // report the maximisation objective
    Ok(finish(sol.x.as_slice(), tag, -sol.value))
}

pub(crate) fn gmv_weights(sigma: &DMatrix<f64>, tag: String) -> Result<Portfolio> {
    let p = sigma.nrows();
    let qp = QpProblem::new(sigma.clone(), DVector::zeros(p));
    let sol = solve_qp(&qp)?;
    Ok(finish(sol.x.as_slice(), tag, sol.value))
}

fn scenario_check(returns: &DMatrix<f64>) -> Result<(usize, usize, DVector<f64>)> {
    let (n, p) = returns.shape();
    if n == 0 || p == 0 {
        return Err(Error::InsufficientData {
            required: 1,
            actual: n,
        });
    }
    if returns.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite scenario return".into()));
    }
    let mean = DVector::from_fn(p, |j, _| returns.column(j).sum() / n as f64);
    Ok((n, p, mean))
}

/// Semi mean-absolute deviation. Variables `[x (p), d (n)]`.
pub fn solve_smad(returns: &DMatrix<f64>) -> Result<Portfolio> {
    smad_lp(returns).and_then(|lp| run_lp(&lp, returns.ncols(), "SMAD"))
}

/// `min β + 1/(αn) Σu_j − r̄ᵀx`, `u_j ≥ −β − r_jᵀx`. Variables `[x (p), β, u (n)]`.
pub fn solve_cvar(returns: &DMatrix<f64>, alpha: f64) -> Result<Portfolio> {
    cvar_lp(returns, alpha).and_then(|lp| run_lp(&lp, returns.ncols(), "CVaR"))
}

/// `min −y − r̄ᵀx`, `r_jᵀx ≥ y`. Variables `[x (p), y]`.
pub fn solve_minimax(returns: &DMatrix<f64>) -> Result<Portfolio> {
    minimax_lp(returns).and_then(|lp| run_lp(&lp, returns.ncols(), "MM"))
}

pub fn smad_lp(returns: &DMatrix<f64>) -> Result<LpProblem> {
    let (n, p, mean) = scenario_check(returns)?;
    let width = p + n;
    let mut objective = vec![0.0; width];
    objective[p..].fill(1.0 / n as f64);
    let mut lp = LpProblem::new(Sense::Minimize, objective);
    lp.add_eq(budget_row(p, width), 1.0);
    for j in 0..n {
        // d_j + (r_j − r̄)ᵀx ≥ 0
        let mut row = vec![0.0; width];
        for i in 0..p {
            row[i] = returns[(j, i)] - mean[i];
        }
        row[p + j] = 1.0;
        lp.add_ge(row, 0.0);
    }
    Ok(lp)
}

pub fn cvar_lp(returns: &DMatrix<f64>, alpha: f64) -> Result<LpProblem> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "CVaR level must lie in (0, 1), got {alpha}"
        )));
    }
    let (n, p, mean) = scenario_check(returns)?;
    let width = p + 1 + n;
    let mut objective = vec![0.0; width];
    for i in 0..p {
        objective[i] = -mean[i];
    }
    objective[p] = 1.0;
    objective[p + 1..].fill(1.0 / (alpha * n as f64));
    let mut lp = LpProblem::new(Sense::Minimize, objective);
    lp.set_free(p);
    lp.add_eq(budget_row(p, width), 1.0);
    for j in 0..n {
        let mut row = vec![0.0; width];
        for i in 0..p {
            row[i] = returns[(j, i)];
        }
        row[p] = 1.0;
        row[p + 1 + j] = 1.0;
        lp.add_ge(row, 0.0);
    }
    Ok(lp)
}

pub fn minimax_lp(returns: &DMatrix<f64>) -> Result<LpProblem> {
    let (n, p, mean) = scenario_check(returns)?;
    let width = p + 1;
    let mut objective: Vec<f64> = mean.iter().map(|m| -m).collect();
    objective.push(-1.0);
    let mut lp = LpProblem::new(Sense::Minimize, objective);
    lp.set_free(p);
    lp.add_eq(budget_row(p, width), 1.0);
    for j in 0..n {
        let mut row: Vec<f64> = returns.row(j).iter().copied().collect();
        row.push(-1.0);
        lp.add_ge(row, 0.0);
    }
    Ok(lp)
}

fn budget_row(p: usize, width: usize) -> Vec<f64> {
    let mut row = vec![0.0; width];
    row[..p].fill(1.0);
    row
}

fn run_lp(lp: &LpProblem, p: usize, tag: &str) -> Result<Portfolio> {
    let sol = solve_lp(lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(finish(&sol.x[..p], tag.to_string(), sol.value)),
        status => Err(Error::Solver(format!(
            "{tag} LP ended with status {status:?}"
        ))),
    }
}

/// Clamps dust to zero and renormalises onto the simplex.
fn finish(raw: &[f64], tag: String, objective: f64) -> Portfolio {
    let mut weights = DVector::from_iterator(
        raw.len(),
        raw.iter().map(|&w| if w < WEIGHT_FLOOR { 0.0 } else { w }),
    );
    let total = weights.sum();
    if total > 0.0 {
        weights /= total;
    } else {
        weights.fill(1.0 / raw.len() as f64);
    }
    Portfolio {
        weights,
        model_tag: tag,
        objective,
    }
}
