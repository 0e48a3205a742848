//! Synthetic markets from a spiked-covariance factor model.
//!
//! `r_t = m + B f_t + σ_ε ε_t` with `f_t ~ N(0, σ_f² I_k)`, `ε_t ~ N(0, I_p)`
//! and loadings `B_ij ~ N(0, 1)`. Per-asset drifts `m_i` are uniform on
//! `[drift − drift_spread, drift + drift_spread]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::market_data::{PriceSeries, ReturnsMatrix};
use crate::{Error, Result};

pub const INITIAL_PRICE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_assets: usize,
    /// Number of daily returns; prices have one more row.
    pub n_obs: usize,
    pub n_factors: usize,
    pub factor_vol: f64,
    pub idio_vol: f64,
    pub drift: f64,
    pub drift_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_assets: 6,
            n_obs: 1000,
            n_factors: 2,
            factor_vol: 0.008,
            idio_vol: 0.012,
            drift: 3e-4,
            drift_spread: 2e-4,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets == 0 {
            return Err(Error::InvalidParameter(
                "synthetic market needs at least one asset".into(),
            ));
        }
        if self.n_obs == 0 {
            return Err(Error::InvalidParameter(
                "synthetic market needs at least one observation".into(),
            ));
        }
        for (name, v) in [
            ("factor_vol", self.factor_vol),
            ("idio_vol", self.idio_vol),
            ("drift_spread", self.drift_spread),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !self.drift.is_finite() {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        Ok(())
    }
}

/// Model parameters drawn from the seed, kept for inspection.
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub loadings: DMatrix<f64>,
    pub drifts: DVector<f64>,
    pub factor_vol: f64,
    pub idio_vol: f64,
}

impl FactorModel {
    /// `σ_f² B Bᵀ + σ_ε² I`
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.drifts.len();
        &self.loadings * self.loadings.transpose() * self.factor_vol.powi(2)
            + DMatrix::identity(p, p) * self.idio_vol.powi(2)
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // row-major fill so the stream order does not depend on storage layout
    let values: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Draws model parameters and `n_obs` returns.
pub fn generate(config: &SynthConfig) -> Result<(FactorModel, ReturnsMatrix)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (p, n, k) = (config.n_assets, config.n_obs, config.n_factors);
    let loadings = normal_matrix(&mut rng, p, k);
    let drifts = DVector::from_fn(p, |_, _| {
        config.drift + config.drift_spread * (2.0 * rng.random::<f64>() - 1.0)
    });
    let factors = normal_matrix(&mut rng, n, k) * config.factor_vol;
    let noise = normal_matrix(&mut rng, n, p) * config.idio_vol;
    let mut returns = factors * loadings.transpose() + noise;
    for mut row in returns.row_iter_mut() {
        row += drifts.transpose();
    }
    let model = FactorModel {
        loadings,
        drifts,
        factor_vol: config.factor_vol,
        idio_vol: config.idio_vol,
    };
    let matrix = ReturnsMatrix {
        dates: (1..=n).map(date_label).collect(),
        assets: (0..p).map(|i| format!("A{i:03}")).collect(),
        returns,
    };
    Ok((model, matrix))
}

pub fn generate_returns(config: &SynthConfig) -> Result<ReturnsMatrix> {
    generate(config).map(|(_, r)| r)
}

/// Compounds the returns from a starting price of 100.
pub fn generate_prices(config: &SynthConfig) -> Result<PriceSeries> {
    let returns = generate_returns(config)?;
    prices_from_returns(&returns)
}

pub fn prices_from_returns(returns: &ReturnsMatrix) -> Result<PriceSeries> {
    let (n, p) = returns.returns.shape();
    let mut prices = DMatrix::from_element(n + 1, p, INITIAL_PRICE);
    for t in 0..n {
        for i in 0..p {
            let next = prices[(t, i)] * (1.0 + returns.returns[(t, i)]);
            if !(next > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "synthetic price of {} fell to {next} on step {t}; reduce the volatilities",
                    returns.assets[i]
                )));
            }
            prices[(t + 1, i)] = next;
        }
    }
    let dates = std::iter::once(date_label(0))
        .chain(returns.dates.iter().cloned())
        .collect();
    Ok(PriceSeries {
        dates,
        assets: returns.assets.clone(),
        prices,
    })
}

fn date_label(t: usize) -> String {
    format!("D{t:06}")
}
