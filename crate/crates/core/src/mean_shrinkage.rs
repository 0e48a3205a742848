//! Mean-vector estimators: sample mean, James-Stein, Bayes-Stein, the
//! quadratic-loss estimator and Bodnar's optimal linear shrinkage.
//!
//! Every estimator that needs `S_n⁻¹` uses the Moore-Penrose inverse of the
//! (1/n, demeaned) sample covariance, which coincides with the ordinary
//! inverse whenever `S_n` is non-singular.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cov_shrinkage::SampleMoments;
use crate::{Error, Result};

pub const DEFAULT_BOP_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeanKind {
    #[serde(rename = "SM")]
    Sm,
    #[serde(rename = "JS")]
    Js,
    #[serde(rename = "BS")]
    Bs,
    #[serde(rename = "QUAD")]
    Quad,
    #[serde(rename = "BOP")]
    Bop,
}

impl MeanKind {
    pub const ALL: [MeanKind; 5] = [
        MeanKind::Sm,
        MeanKind::Js,
        MeanKind::Bs,
        MeanKind::Quad,
        MeanKind::Bop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeanKind::Sm => "SM",
            MeanKind::Js => "JS",
            MeanKind::Bs => "BS",
            MeanKind::Quad => "QUAD",
            MeanKind::Bop => "BOP",
        }
    }
}

impl fmt::Display for MeanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeanKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mean estimator '{s}'")))
    }
}

/// BOP target exponent, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BopEpsilon(f64);

impl BopEpsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "BOP epsilon must lie in (0, 1), got {value}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for BopEpsilon {
    fn default() -> Self {
        Self(DEFAULT_BOP_EPSILON)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeanDiagnostics {
    /// Shrinkage intensity α̂ (weight on the target).
    pub alpha: Option<f64>,
    /// BOP weight β̂ on the sample mean.
    pub beta: Option<f64>,
    /// Scalar target level: r̂₀ for JS/BS, the entry of μ₀ for BOP.
    pub target: Option<f64>,
    /// `(r̄ - r̂₀1)ᵀ S⁺ (r̄ - r̂₀1)` for JS/BS.
    pub quadratic_form: Option<f64>,
    /// `R₁..R₄` for QUAD.
    pub quad_coefficients: Option<[f64; 4]>,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct MeanEstimate {
    pub mu: DVector<f64>,
    pub kind: MeanKind,
    pub diagnostics: MeanDiagnostics,
}

/// Dispatches on `kind` using precomputed sample moments.
pub fn estimate_mean(
    kind: MeanKind,
    moments: &SampleMoments,
    epsilon: BopEpsilon,
) -> Result<MeanEstimate> {
    let estimate = match kind {
        MeanKind::Sm => sm_from(moments),
        MeanKind::Js => js_from(moments)?,
        MeanKind::Bs => bs_from(moments)?,
        MeanKind::Quad => quad_from(moments)?,
        MeanKind::Bop => bop_from(moments, epsilon)?,
    };
    if estimate.mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!(
            "{kind} produced a non-finite mean"
        )));
    }
    Ok(estimate)
}

/// Column means.
pub fn sample_mean(returns: &DMatrix<f64>) -> Result<MeanEstimate> {
    let n = returns.nrows();
    if n == 0 || returns.ncols() == 0 {
        return Err(Error::InsufficientData {
            required: 1,
            actual: n,
        });
    }
    let mu = DVector::from_fn(returns.ncols(), |j, _| returns.column(j).sum() / n as f64);
    Ok(MeanEstimate {
        mu,
        kind: MeanKind::Sm,
        diagnostics: MeanDiagnostics::default(),
    })
}

pub fn js_mean(returns: &DMatrix<f64>) -> Result<MeanEstimate> {
    js_from(&SampleMoments::new(returns)?)
}

pub fn bs_mean(returns: &DMatrix<f64>) -> Result<MeanEstimate> {
    bs_from(&SampleMoments::new(returns)?)
}

pub fn quad_mean(returns: &DMatrix<f64>) -> Result<MeanEstimate> {
    quad_from(&SampleMoments::new(returns)?)
}

pub fn bop_mean(returns: &DMatrix<f64>, epsilon: BopEpsilon) -> Result<MeanEstimate> {
    bop_from(&SampleMoments::new(returns)?, epsilon)
}

fn sm_from(m: &SampleMoments) -> MeanEstimate {
    MeanEstimate {
        mu: m.means.clone(),
        kind: MeanKind::Sm,
        diagnostics: MeanDiagnostics::default(),
    }
}

/// Common target `r̂₀ = r̄ᵀS⁺1 / 1ᵀS⁺1` and the quadratic form of `r̄ - r̂₀1`.
/// Falls back to the grand mean when `1ᵀS⁺1` vanishes (zero covariance).
fn stein_target(m: &SampleMoments) -> Result<(f64, f64, bool)> {
    let s_inv = m.pinv()?;
    let ones = DVector::from_element(m.p, 1.0);
    let s_inv_one = s_inv * &ones;
    let denom = ones.dot(&s_inv_one);
    let (r0, degenerate) = if denom > 0.0 {
        (m.means.dot(&s_inv_one) / denom, false)
    } else {
        (m.means.mean(), true)
    };
    let dev = &m.means - &ones * r0;
    let q = dev.dot(&(s_inv * &dev)).max(0.0);
    Ok((r0, q, degenerate))
}

fn shrink_to_constant(
    m: &SampleMoments,
    kind: MeanKind,
    alpha: f64,
    r0: f64,
    q: f64,
    degenerate: bool,
) -> MeanEstimate {
    let mu = m.means.map(|r| alpha * r0 + (1.0 - alpha) * r);
    MeanEstimate {
        mu,
        kind,
        diagnostics: MeanDiagnostics {
            alpha: Some(alpha),
            target: Some(r0),
            quadratic_form: Some(q),
            degenerate,
            ..Default::default()
        },
    }
}

/// `α̂ = min(1, (p-2) / (n q))`, with `α̂ := 1` when `q = 0` and clamped at 0 for `p < 2`.
fn js_from(m: &SampleMoments) -> Result<MeanEstimate> {
    let (r0, q, degenerate) = stein_target(m)?;
    let p = m.p as f64;
    let n = m.n as f64;
    let alpha = if q > 0.0 {
        ((p - 2.0) / (n * q)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(shrink_to_constant(
        m,
        MeanKind::Js,
        alpha,
        r0,
        q,
        degenerate,
    ))
}

/// `α̂ = (p+2) / (p+2+n q)`
fn bs_from(m: &SampleMoments) -> Result<MeanEstimate> {
    let (r0, q, degenerate) = stein_target(m)?;
    let p = m.p as f64;
    let n = m.n as f64;
    let alpha = (p + 2.0) / (p + 2.0 + n * q);
    Ok(shrink_to_constant(
        m,
        MeanKind::Bs,
        alpha,
        r0,
        q,
        degenerate,
    ))
}

/// Quadratic-loss estimator built from the raw return rows `R_k` and `S⁺`.
/// The `1` vectors in `R₃`, `R₄` are p-dimensional.
fn quad_from(m: &SampleMoments) -> Result<MeanEstimate> {
    let n = m.n as f64;
    let p = m.p as f64;
    let s_inv = m.pinv()?;
    let rows = raw_returns(m);
    // Gram matrix G_ij = R_iᵀ S⁺ R_j
    let projected = &rows * s_inv;
    let gram = &projected * rows.transpose();
    let diag_sum = gram.trace();
    let off_sum = gram.sum() - diag_sum;

    let ones = DVector::from_element(m.p, 1.0);
    let s_inv_one = s_inv * &ones;
    let one_s_one = ones.dot(&s_inv_one);
    if one_s_one.abs() <= 1e-12 {
        return Err(Error::Degenerate("QUAD degenerate: 1ᵀS⁺1 vanishes".into()));
    }
    let a = &rows * &s_inv_one; // a_k = 1ᵀ S⁺ R_k
    let a_sum = a.sum();
    let a_off = a_sum * a_sum - a.norm_squared();

    let r1 = off_sum / (p * (n - 1.0));
    let r2 = (diag_sum - off_sum / (n - 1.0)) / (n * p);
    let r3 = a_sum / (n * one_s_one);
    let r4 = a_off / (p * (n - 1.0) * one_s_one);
    let denom = r1 + r2 - r3;
    if denom.abs() <= 1e-12 {
        return Err(Error::Degenerate(
            "QUAD degenerate: R1 + R2 - R3 vanishes".into(),
        ));
    }
    let level = r2 * r4 / denom;
    let weight = (r1 - r3) / denom;
    let mu = m.means.map(|r| level + weight * r);
    Ok(MeanEstimate {
        mu,
        kind: MeanKind::Quad,
        diagnostics: MeanDiagnostics {
            alpha: Some(weight),
            target: Some(level),
            quad_coefficients: Some([r1, r2, r3, r4]),
            ..Default::default()
        },
    })
}

fn raw_returns(m: &SampleMoments) -> DMatrix<f64> {
    DMatrix::from_fn(m.n, m.p, |t, j| m.centered[(t, j)] + m.means[j])
}

/// `μ̂ = α̂ μ₀ + β̂ r̄` with `μ₀ = n^((ε-1)/2) 1`.
///
/// Falls back to `r̄` (flagged) when `r̄` is collinear with `μ₀` under the
/// `S⁺` inner product or when `c = 1`.
fn bop_from(m: &SampleMoments, epsilon: BopEpsilon) -> Result<MeanEstimate> {
    let n = m.n as f64;
    let c = m.concentration();
    let level = n.powf((epsilon.get() - 1.0) / 2.0);
    let mu0 = DVector::from_element(m.p, level);
    let s_inv = m.pinv()?;
    let r_bar = &m.means;
    let s_inv_mu0 = s_inv * &mu0;
    let rr = r_bar.dot(&(s_inv * r_bar));
    let mm = mu0.dot(&s_inv_mu0);
    let rm = r_bar.dot(&s_inv_mu0);
    let denom = rr * mm - rm * rm;

    if !(mm > 0.0) || denom <= 1e-12 * (rr * mm).abs() || c == 1.0 {
        return Ok(MeanEstimate {
            mu: r_bar.clone(),
            kind: MeanKind::Bop,
            diagnostics: MeanDiagnostics {
                alpha: Some(0.0),
                beta: Some(1.0),
                target: Some(level),
                degenerate: true,
                ..Default::default()
            },
        });
    }
    let beta = ((rr - c / (1.0 - c)) * mm - rm * rm) / denom;
    let alpha = (1.0 - beta) * rm / mm;
    let mu = &mu0 * alpha + r_bar * beta;
    Ok(MeanEstimate {
        mu,
        kind: MeanKind::Bop,
        diagnostics: MeanDiagnostics {
            alpha: Some(alpha),
            beta: Some(beta),
            target: Some(level),
            ..Default::default()
        },
    })
}
