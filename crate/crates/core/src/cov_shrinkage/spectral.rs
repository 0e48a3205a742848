//! Nonlinear (eigenvalue) shrinkage: LIS, QIS, GIS and AS.
//!
//! All four keep the sample eigenvectors and replace the eigenvalues.
//! Demeaning removes one degree of freedom, so these estimators use the
//! effective sample size `n - 1`: `c = p / (n - 1)`, and a demeaned `S_n`
//! with `p ≥ n` has exactly `p - n + 1` null eigenvalues.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::{CovDiagnostics, CovEstimate, CovKind, SampleMoments};
use crate::numerics::SymEigen;
use crate::{Error, Result};

/// Smallest eigenvalue, relative to the largest, accepted as non-zero.
const SINGULAR_TOL: f64 = 1e-12;

fn effective_n(m: &SampleMoments) -> usize {
    m.n - 1
}

fn effective_concentration(m: &SampleMoments) -> f64 {
    m.p as f64 / effective_n(m) as f64
}

/// `min(c², 1/c²)^0.35 / p^0.35`
fn inverse_bandwidth(c: f64, p: usize) -> f64 {
    (c * c).min(1.0 / (c * c)).powf(0.35) / (p as f64).powf(0.35)
}

fn require_low_dimensional(m: &SampleMoments, kind: CovKind) -> Result<()> {
    let c = effective_concentration(m);
    if c >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "{kind} requires c < 1 (effective c = {c:.4})"
        )));
    }
    Ok(())
}

fn require_nonsingular(eig: &SymEigen, kind: CovKind) -> Result<()> {
    let p = eig.dim();
    let top = eig.values[p - 1];
    if !(eig.values[0] > SINGULAR_TOL * top) {
        return Err(Error::Degenerate(format!(
            "{kind} requires nonsingular sample covariance"
        )));
    }
    Ok(())
}

/// Kernel-smoothed Stein shrinker `θ̃` and its companion `π̃` at every grid
/// point, for inverse eigenvalues `x` (the non-null part of the spectrum).
fn stein_shrinker(x: &[f64], p: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let pf = p as f64;
    let theta = x
        .iter()
        .map(|&xi| {
            x.iter()
                .map(|&xj| {
                    let d = xj - xi;
                    xj * d / (d * d + h * h * xj * xj)
                })
                .sum::<f64>()
                / pf
        })
        .collect();
    let pi_tilde = x
        .iter()
        .map(|&xi| {
            x.iter()
                .map(|&xj| {
                    let d = xj - xi;
                    h * xj * xj / (d * d + h * h * xj * xj)
                })
                .sum::<f64>()
                / pf
        })
        .collect();
    (theta, pi_tilde)
}

/// LIS shrunk inverse eigenvalues, ascending-eigenvalue order.
///
/// `δ̂ = (1-c)x + 2cxθ̃(x)`, truncated from above at `x` and floored at
/// `(1-c)·min(x)` so every inverse eigenvalue stays positive.
fn lis_inverse(eig: &SymEigen, c: f64) -> (Vec<f64>, f64) {
    let p = eig.dim();
    let x: Vec<f64> = eig.values.iter().map(|l| 1.0 / l).collect();
    let h = inverse_bandwidth(c, p);
    let (theta, _) = stein_shrinker(&x, p, h);
    let floor = (1.0 - c) * x.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = x
        .iter()
        .zip(&theta)
        .map(|(&xi, &th)| {
            let raw = (1.0 - c) * xi + 2.0 * c * xi * th;
            xi.min(raw).max(floor)
        })
        .collect();
    (delta, h)
}

/// QIS eigenvalues after trace normalisation.
fn qis_eigenvalues(eig: &SymEigen, n_eff: usize, c: f64) -> Result<(Vec<f64>, f64)> {
    let p = eig.dim();
    let trace: f64 = eig.values.iter().sum();
    if !(trace > 0.0) {
        return Err(Error::Degenerate(
            "QIS: all sample eigenvalues are zero".into(),
        ));
    }
    let n_null = p.saturating_sub(n_eff);
    let nonzero = &eig.values.as_slice()[n_null..];
    if !(nonzero[0] > SINGULAR_TOL * eig.values[p - 1]) {
        return Err(Error::Degenerate(
            "QIS: sample covariance rank is below min(p, n - 1)".into(),
        ));
    }
    let x: Vec<f64> = nonzero.iter().map(|l| 1.0 / l).collect();
    let h = inverse_bandwidth(c, p);
    let (theta, pi_tilde) = stein_shrinker(&x, p, h);

    let mut delta = Vec::with_capacity(p);
    if n_null == 0 {
        for ((&xi, &th), &pt) in x.iter().zip(&theta).zip(&pi_tilde) {
            let a2 = th * th + pt * pt;
            let denom =
                (1.0 - c) * (1.0 - c) * xi + 2.0 * c * (1.0 - c) * xi * th + c * c * xi * a2;
            delta.push(1.0 / denom);
        }
    } else {
        let mean_x = x.iter().sum::<f64>() / x.len() as f64;
        let delta0 = 1.0 / ((c - 1.0) * mean_x);
        delta.extend(std::iter::repeat_n(delta0, n_null));
        for ((&xi, &th), &pt) in x.iter().zip(&theta).zip(&pi_tilde) {
            let a2 = th * th + pt * pt;
            delta.push(1.0 / (xi * a2));
        }
    }
    let total: f64 = delta.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate(
            "QIS: non-positive shrunk spectrum".into(),
        ));
    }
    let scale = trace / total;
    Ok((delta.into_iter().map(|d| d * scale).collect(), h))
}

fn spectral_estimate(
    eig: &SymEigen,
    kind: CovKind,
    eigenvalues: Vec<f64>,
    diagnostics: CovDiagnostics,
) -> CovEstimate {
    let sigma = eig.reconstruct_with(&DVector::from_vec(eigenvalues.clone()));
    CovEstimate {
        sigma,
        kind,
        diagnostics: CovDiagnostics {
            eigenvalues: Some(eigenvalues),
            ..diagnostics
        },
    }
}

pub fn lis_cov(m: &SampleMoments) -> Result<CovEstimate> {
    require_low_dimensional(m, CovKind::Lis)?;
    let eig = m.eigen()?;
    require_nonsingular(eig, CovKind::Lis)?;
    let c = effective_concentration(m);
    let (delta, h) = lis_inverse(eig, c);
    let values = delta.iter().map(|d| 1.0 / d).collect();
    Ok(spectral_estimate(
        eig,
        CovKind::Lis,
        values,
        CovDiagnostics {
            concentration: c,
            bandwidth: Some(h),
            inverse_eigenvalues: Some(delta),
            ..Default::default()
        },
    ))
}

pub fn qis_cov(m: &SampleMoments) -> Result<CovEstimate> {
    let eig = m.eigen()?;
    let c = effective_concentration(m);
    let (values, h) = qis_eigenvalues(eig, effective_n(m), c)?;
    Ok(spectral_estimate(
        eig,
        CovKind::Qis,
        values,
        CovDiagnostics {
            concentration: c,
            bandwidth: Some(h),
            ..Default::default()
        },
    ))
}

/// `δ^GIS = sqrt(δ^QIS / δ^LIS)`: geometric mean of the QIS eigenvalue and
/// the LIS eigenvalue `1/δ^LIS`.
pub fn gis_cov(m: &SampleMoments) -> Result<CovEstimate> {
    require_low_dimensional(m, CovKind::Gis)?;
    let eig = m.eigen()?;
    require_nonsingular(eig, CovKind::Gis)?;
    let c = effective_concentration(m);
    let (lis, h) = lis_inverse(eig, c);
    let (qis, _) = qis_eigenvalues(eig, effective_n(m), c)?;
    let values = qis.iter().zip(&lis).map(|(q, l)| (q / l).sqrt()).collect();
    Ok(spectral_estimate(
        eig,
        CovKind::Gis,
        values,
        CovDiagnostics {
            concentration: c,
            bandwidth: Some(h),
            inverse_eigenvalues: Some(lis),
            ..Default::default()
        },
    ))
}

/// `π·H[K](κ)` for the Epanechnikov kernel on `[-√5, √5]`.
///
/// Far outside the support the closed form subtracts two `O(κ)` terms to get
/// an `O(1/κ)` result, so there the odd series in `u = √5/κ` is summed
/// instead: `-(3/√5) Σ u^(2m-1) / ((2m-1)(2m+1))`.
fn epanechnikov_hilbert(kappa: f64) -> f64 {
    let sqrt5 = 5.0_f64.sqrt();
    if kappa.abs() >= 2.0 * sqrt5 {
        let u = sqrt5 / kappa;
        let u2 = u * u;
        let mut power = u;
        let mut sum = 0.0;
        for m in 1..200 {
            let k = 2.0 * m as f64;
            let term = power / ((k - 1.0) * (k + 1.0));
            sum += term;
            if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
                break;
            }
            power *= u2;
        }
        return -3.0 / sqrt5 * sum;
    }
    let bump = 1.0 - kappa * kappa / 5.0;
    let log_term = if bump == 0.0 {
        0.0
    } else {
        bump * ((sqrt5 - kappa) / (sqrt5 + kappa)).abs().ln()
    };
    -0.3 * kappa + 3.0 / (4.0 * sqrt5) * log_term
}

/// Analytical nonlinear shrinkage with an Epanechnikov kernel and locally
/// adaptive bandwidths `h_j = n^(-1/3) λ_j`.
pub fn as_cov(m: &SampleMoments) -> Result<CovEstimate> {
    require_low_dimensional(m, CovKind::As)?;
    let eig = m.eigen()?;
    require_nonsingular(eig, CovKind::As)?;
    let c = effective_concentration(m);
    let p = eig.dim();
    let pf = p as f64;
    let h = (effective_n(m) as f64).powf(-1.0 / 3.0);
    let lambda = eig.values.as_slice();
    let sqrt5 = 5.0_f64.sqrt();

    let mut density = Vec::with_capacity(p);
    let mut hilbert = Vec::with_capacity(p);
    for &li in lambda {
        let mut f = 0.0;
        let mut hf = 0.0;
        for &lj in lambda {
            let hj = h * lj;
            let kappa = (li - lj) / hj;
            let bump = 1.0 - kappa * kappa / 5.0;
            f += 3.0 / (4.0 * sqrt5 * hj) * bump.max(0.0);
            hf += epanechnikov_hilbert(kappa) / (hj * PI);
        }
        density.push(f / pf);
        hilbert.push(hf / pf);
    }
    let values = lambda
        .iter()
        .zip(density.iter().zip(&hilbert))
        .map(|(&l, (&f, &hf))| {
            let a = PI * c * l * f;
            let b = 1.0 - c - PI * c * l * hf;
            l / (a * a + b * b)
        })
        .collect();
    Ok(spectral_estimate(
        eig,
        CovKind::As,
        values,
        CovDiagnostics {
            concentration: c,
            bandwidth: Some(h),
            density: Some(density),
            hilbert: Some(hilbert),
            ..Default::default()
        },
    ))
}
