//! Linear shrinkage: the LS estimator toward `I/p` and the Ledoit-Wolf family.

use nalgebra::DMatrix;

use super::{CovDiagnostics, CovEstimate, CovKind, SampleMoments};
use crate::{Error, Result};

/// Ledoit-Wolf shrinkage targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LwTarget {
    /// `v̄ I` (COV1)
    Identity,
    /// `v̄ I + c̄ (J - I)` (COV2)
    TwoParameter,
    /// constant correlation (COVCOR)
    ConstantCorrelation,
    /// `diag(S)` (COVDIAG)
    Diagonal,
    /// single-factor equal-weight market model (COVMKT)
    Market,
}

impl LwTarget {
    pub fn kind(self) -> CovKind {
        match self {
            LwTarget::Identity => CovKind::Cov1,
            LwTarget::TwoParameter => CovKind::Cov2,
            LwTarget::ConstantCorrelation => CovKind::CovCor,
            LwTarget::Diagonal => CovKind::CovDiag,
            LwTarget::Market => CovKind::CovMkt,
        }
    }
}

/// Quantities entering `λ̂ = min(1, max(0, (π̂ - ρ̂) / (n γ̂)))`.
#[derive(Debug, Clone)]
pub struct LwIngredients {
    pub target: DMatrix<f64>,
    pub pi_hat: f64,
    pub rho_diag: f64,
    pub rho_off: f64,
    pub gamma_hat: f64,
}

impl LwIngredients {
    pub fn rho_hat(&self) -> f64 {
        self.rho_diag + self.rho_off
    }
}

/// `Σ̂ = α̂ S + β̂ Σ₀` with `Σ₀ = I/p`.
///
/// `α̂` is clamped to `[0, 1]` (and `β̂` recomputed from the clamped value)
/// so the estimate stays PSD in the high-dimensional regime where the raw
/// coefficient turns negative.
pub fn ls_cov(m: &SampleMoments) -> Result<CovEstimate> {
    let p = m.p as f64;
    let n = m.n as f64;
    let s = &m.cov;
    let frob_s = s.norm_squared();
    if frob_s == 0.0 {
        return Err(Error::Degenerate(
            "LS requires a non-zero sample covariance".into(),
        ));
    }
    // S is PSD, so its trace norm is its trace.
    let trace_norm_s = s.trace();
    let frob_target = 1.0 / p;
    let trace_norm_s_target = trace_norm_s / p;
    let denom = frob_s * frob_target - trace_norm_s_target * trace_norm_s_target;

    let mut diagnostics = CovDiagnostics {
        concentration: m.concentration(),
        ..Default::default()
    };
    if denom <= 1e-14 * frob_s * frob_target {
        diagnostics.degenerate = true;
        diagnostics.intensity = Some(1.0);
        diagnostics.beta = Some(0.0);
        return Ok(CovEstimate {
            sigma: s.clone(),
            kind: CovKind::Ls,
            diagnostics,
        });
    }
    let raw_alpha = 1.0 - (trace_norm_s * trace_norm_s * frob_target) / (n * denom);
    let alpha = raw_alpha.clamp(0.0, 1.0);
    let beta = trace_norm_s_target / frob_target * (1.0 - alpha);
    let mut sigma = s * alpha;
    for i in 0..m.p {
        sigma[(i, i)] += beta / p;
    }
    diagnostics.intensity = Some(alpha);
    diagnostics.beta = Some(beta);
    Ok(CovEstimate {
        sigma,
        kind: CovKind::Ls,
        diagnostics,
    })
}

/// `Σ̂ = λ̂ T + (1 - λ̂) S` for one of the five Ledoit-Wolf targets.
pub fn lw_cov(m: &SampleMoments, target: LwTarget) -> Result<CovEstimate> {
    let ingredients = lw_ingredients(m, target);
    let n = m.n as f64;
    let lambda = if ingredients.gamma_hat > 0.0 {
        ((ingredients.pi_hat - ingredients.rho_hat()) / (n * ingredients.gamma_hat)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let sigma =
        crate::numerics::symmetrize(&(&ingredients.target * lambda + &m.cov * (1.0 - lambda)));
    Ok(CovEstimate {
        sigma,
        kind: target.kind(),
        diagnostics: CovDiagnostics {
            concentration: m.concentration(),
            intensity: Some(lambda),
            degenerate: ingredients.gamma_hat == 0.0,
            lw: Some(ingredients),
            ..Default::default()
        },
    })
}

fn lw_ingredients(m: &SampleMoments, target: LwTarget) -> LwIngredients {
    let n = m.n as f64;
    let p = m.p;
    let pf = p as f64;
    let y = &m.centered;
    let s = &m.cov;
    let y2 = y.map(|v| v * v);
    let s2 = y2.transpose() * &y2 / n;

    let pi_hat: f64 = (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| s2[(i, j)] - s[(i, j)] * s[(i, j)])
        .sum();
    let rho_diag: f64 = (0..p).map(|i| s2[(i, i)] - s[(i, i)] * s[(i, i)]).sum();
    let mean_var = s.trace() / pf;
    let off_sum: f64 = s.sum() - s.trace();

    let (target_matrix, rho_diag, rho_off) = match target {
        LwTarget::Identity => (DMatrix::identity(p, p) * mean_var, 0.0, 0.0),
        LwTarget::Diagonal => (DMatrix::from_diagonal(&s.diagonal()), rho_diag, 0.0),
        LwTarget::TwoParameter => {
            let mean_cov = if p > 1 {
                off_sum / (pf * (pf - 1.0))
            } else {
                0.0
            };
            let t = DMatrix::from_fn(p, p, |i, j| if i == j { mean_var } else { mean_cov });
            let rho_off = if p > 1 {
                let fourth: f64 = y
                    .row_iter()
                    .map(|row| {
                        let total: f64 = row.sum();
                        let squares: f64 = row.iter().map(|v| v * v).sum();
                        let z = total * total - squares;
                        z * z
                    })
                    .sum();
                (fourth / (pf * n) - off_sum * off_sum / pf) / (pf - 1.0)
            } else {
                0.0
            };
            (t, rho_diag, rho_off)
        }
        LwTarget::ConstantCorrelation => {
            let sd: Vec<f64> = (0..p).map(|i| s[(i, i)].sqrt()).collect();
            let mut corr_sum = 0.0;
            for i in 0..p {
                for j in 0..p {
                    if i != j && sd[i] > 0.0 && sd[j] > 0.0 {
                        corr_sum += s[(i, j)] / (sd[i] * sd[j]);
                    }
                }
            }
            let r_bar = if p > 1 {
                corr_sum / (pf * (pf - 1.0))
            } else {
                0.0
            };
            let t = DMatrix::from_fn(p, p, |i, j| {
                if i == j {
                    s[(i, i)]
                } else {
                    r_bar * sd[i] * sd[j]
                }
            });
            // Γ = (1/n)(Y³)ᵀY - (v 1ᵀ) ∘ S
            let y3 = y.map(|v| v * v * v);
            let third = y3.transpose() * y / n;
            let mut weighted = 0.0;
            for i in 0..p {
                for j in 0..p {
                    if i != j && sd[i] > 0.0 {
                        let gamma_ij = third[(i, j)] - s[(i, i)] * s[(i, j)];
                        weighted += sd[j] / sd[i] * gamma_ij;
                    }
                }
            }
            (t, rho_diag, r_bar * weighted)
        }
        LwTarget::Market => {
            // R_mkt = (1/p) Y 1_p
            let market: Vec<f64> = y.row_iter().map(|row| row.sum() / pf).collect();
            let var_mkt: f64 = market.iter().map(|v| v * v).sum::<f64>() / n;
            let cov_mkt: Vec<f64> = (0..p)
                .map(|i| (0..m.n).map(|t| y[(t, i)] * market[t]).sum::<f64>() / n)
                .collect();
            if var_mkt <= 0.0 {
                (DMatrix::from_diagonal(&s.diagonal()), rho_diag, 0.0)
            } else {
                let t = DMatrix::from_fn(p, p, |i, j| {
                    if i == j {
                        s[(i, i)]
                    } else {
                        cov_mkt[i] * cov_mkt[j] / var_mkt
                    }
                });
                // M = Y ∘ R_mkt (row t scaled by the market return)
                let mm = DMatrix::from_fn(m.n, p, |t, i| y[(t, i)] * market[t]);
                let k1_first = y2.transpose() * &mm / n;
                let k1 = DMatrix::from_fn(p, p, |i, j| k1_first[(i, j)] - cov_mkt[i] * s[(i, j)]);
                let k2 = mm.transpose() * &mm / n - s * var_mkt;
                let mut term1 = 0.0;
                let mut term2 = 0.0;
                let mut term3 = 0.0;
                for i in 0..p {
                    for j in 0..p {
                        term1 += k1[(i, j)] * cov_mkt[j] / var_mkt;
                        term2 += k2[(i, j)] * cov_mkt[i] * cov_mkt[j] / (var_mkt * var_mkt);
                    }
                    term3 += k1[(i, i)] * cov_mkt[i] * cov_mkt[i] / (var_mkt * var_mkt);
                }
                (t, rho_diag, 2.0 * term1 - term2 - term3)
            }
        }
    };

    let gamma_hat = (s - &target_matrix).norm_squared();
    LwIngredients {
        target: target_matrix,
        pi_hat,
        rho_diag,
        rho_off,
        gamma_hat,
    }
}
