//! Sample covariance and the ten shrinkage covariance estimators.
//!
//! All estimators work from a shared [`SampleMoments`], so one window's
//! demeaning, sample covariance, eigendecomposition and pseudo-inverse are
//! computed once and reused by every estimator kind.

mod linear;
mod spectral;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numerics::{pinv, sym_eigen, SymEigen, DEFAULT_RANK_TOL};
use crate::{Error, Result};

pub use linear::{ls_cov, lw_cov, LwIngredients, LwTarget};
pub use spectral::{as_cov, gis_cov, lis_cov, qis_cov};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CovKind {
    #[serde(rename = "SCV")]
    Scv,
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "COV1")]
    Cov1,
    #[serde(rename = "COV2")]
    Cov2,
    #[serde(rename = "COVCOR")]
    CovCor,
    #[serde(rename = "COVDIAG")]
    CovDiag,
    #[serde(rename = "COVMKT")]
    CovMkt,
    #[serde(rename = "LIS")]
    Lis,
    #[serde(rename = "QIS")]
    Qis,
    #[serde(rename = "GIS")]
    Gis,
    #[serde(rename = "AS")]
    As,
}

impl CovKind {
    pub const ALL: [CovKind; 11] = [
        CovKind::Scv,
        CovKind::Ls,
        CovKind::Cov1,
        CovKind::Cov2,
        CovKind::CovCor,
        CovKind::CovDiag,
        CovKind::CovMkt,
        CovKind::Lis,
        CovKind::Qis,
        CovKind::Gis,
        CovKind::As,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CovKind::Scv => "SCV",
            CovKind::Ls => "LS",
            CovKind::Cov1 => "COV1",
            CovKind::Cov2 => "COV2",
            CovKind::CovCor => "COVCOR",
            CovKind::CovDiag => "COVDIAG",
            CovKind::CovMkt => "COVMKT",
            CovKind::Lis => "LIS",
            CovKind::Qis => "QIS",
            CovKind::Gis => "GIS",
            CovKind::As => "AS",
        }
    }

    /// LIS, GIS and AS need a non-singular sample covariance (`c < 1`).
    pub fn requires_low_dimension(self) -> bool {
        matches!(self, CovKind::Lis | CovKind::Gis | CovKind::As)
    }
}

impl fmt::Display for CovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CovKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown covariance estimator '{s}'")))
    }
}

/// Kinds usable at concentration ratio `c = p/n`; `c = 1` counts as high-dimensional.
pub fn applicable_kinds(c: f64) -> Vec<CovKind> {
    CovKind::ALL
        .into_iter()
        .filter(|k| c < 1.0 || !k.requires_low_dimension())
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct CovDiagnostics {
    /// Concentration ratio used by the estimator (`p/n`, or `p/(n-1)` for the spectral family).
    pub concentration: f64,
    /// λ̂ for the LW family, α̂ for LS.
    pub intensity: Option<f64>,
    /// β̂ for LS.
    pub beta: Option<f64>,
    /// Kernel bandwidth `h_n`.
    pub bandwidth: Option<f64>,
    pub lw: Option<LwIngredients>,
    /// Shrunk eigenvalues, aligned with the ascending sample eigenvalues.
    pub eigenvalues: Option<Vec<f64>>,
    /// LIS shrunk inverse eigenvalues δ^LIS (LIS and GIS only).
    pub inverse_eigenvalues: Option<Vec<f64>>,
    /// AS spectral density estimate f̂ at each sample eigenvalue.
    pub density: Option<Vec<f64>>,
    /// AS Hilbert transform H̃ at each sample eigenvalue.
    pub hilbert: Option<Vec<f64>>,
    /// Set when a documented degenerate branch was taken.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct CovEstimate {
    pub sigma: DMatrix<f64>,
    pub kind: CovKind,
    pub diagnostics: CovDiagnostics,
}

/// Demeaned data plus lazily computed spectral quantities of `S_n`.
#[derive(Debug)]
pub struct SampleMoments {
    pub n: usize,
    pub p: usize,
    pub means: DVector<f64>,
    /// Column-demeaned returns `Y`.
    pub centered: DMatrix<f64>,
    /// `S_n = YᵀY / n`.
    pub cov: DMatrix<f64>,
    eigen: OnceLock<SymEigen>,
    pseudo_inverse: OnceLock<DMatrix<f64>>,
}

impl SampleMoments {
    pub fn new(returns: &DMatrix<f64>) -> Result<Self> {
        let n = returns.nrows();
        let p = returns.ncols();
        if n < 2 {
            return Err(Error::InsufficientData {
                required: 2,
                actual: n,
            });
        }
        if p == 0 {
            return Err(Error::InvalidParameter("no assets".into()));
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite return".into()));
        }
        let means = DVector::from_fn(p, |j, _| returns.column(j).sum() / n as f64);
        let centered = DMatrix::from_fn(n, p, |t, j| returns[(t, j)] - means[j]);
        let cov = crate::numerics::symmetrize(&(centered.transpose() * &centered / n as f64));
        Ok(Self {
            n,
            p,
            means,
            centered,
            cov,
            eigen: OnceLock::new(),
            pseudo_inverse: OnceLock::new(),
        })
    }

    /// `p / n`
    pub fn concentration(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn eigen(&self) -> Result<&SymEigen> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = sym_eigen(&self.cov)?;
        Ok(self.eigen.get_or_init(|| e))
    }

    /// Moore-Penrose inverse of `S_n` (equal to the inverse when non-singular).
    pub fn pinv(&self) -> Result<&DMatrix<f64>> {
        if let Some(m) = self.pseudo_inverse.get() {
            return Ok(m);
        }
        let m = match self.eigen.get() {
            Some(e) => crate::numerics::eigen_pinv(e, DEFAULT_RANK_TOL),
            None => pinv(&self.cov, DEFAULT_RANK_TOL)?,
        };
        Ok(self.pseudo_inverse.get_or_init(|| m))
    }

    pub fn estimate(&self, kind: CovKind) -> Result<CovEstimate> {
        let estimate = match kind {
            CovKind::Scv => sample_cov_from(self),
            CovKind::Ls => ls_cov(self)?,
            CovKind::Cov1 => lw_cov(self, LwTarget::Identity)?,
            CovKind::Cov2 => lw_cov(self, LwTarget::TwoParameter)?,
            CovKind::CovCor => lw_cov(self, LwTarget::ConstantCorrelation)?,
            CovKind::CovDiag => lw_cov(self, LwTarget::Diagonal)?,
            CovKind::CovMkt => lw_cov(self, LwTarget::Market)?,
            CovKind::Lis => lis_cov(self)?,
            CovKind::Qis => qis_cov(self)?,
            CovKind::Gis => gis_cov(self)?,
            CovKind::As => as_cov(self)?,
        };
        if estimate.sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "{kind} produced non-finite entries"
            )));
        }
        Ok(estimate)
    }
}

/// `S_n = (1/n) R̃ᵀR̃` with column-demeaned `R̃`.
pub fn sample_cov(returns: &DMatrix<f64>) -> Result<CovEstimate> {
    Ok(sample_cov_from(&SampleMoments::new(returns)?))
}

fn sample_cov_from(m: &SampleMoments) -> CovEstimate {
    CovEstimate {
        sigma: m.cov.clone(),
        kind: CovKind::Scv,
        diagnostics: CovDiagnostics {
            concentration: m.concentration(),
            ..Default::default()
        },
    }
}

/// Runs one estimator directly on a returns matrix.
pub fn estimate_cov(kind: CovKind, returns: &DMatrix<f64>) -> Result<CovEstimate> {
    SampleMoments::new(returns)?.estimate(kind)
}
