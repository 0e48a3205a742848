//! Shrinkage estimation portfolio toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: symmetric eigendecomposition, pseudo-inverse, a dense
//!   simplex LP solver and an active-set QP solver over the unit simplex.
//! - [`market_data`]: price ingestion, arithmetic returns and rolling windows.
//! - [`mean_shrinkage`] and [`cov_shrinkage`]: the 5 mean and 11 covariance
//!   estimators.
//! - [`portfolio_opt`]: long-only MV/GMV plus the SMAD, CVaR and MiniMax
//!   benchmark models.
//! - [`metrics`]: out-of-sample performance metrics.
//! - [`dea`]: super-efficiency DEA instances, scores and rankings.
//! - [`backtest`]: the rolling-window model grid and best-model selection.
//! - [`report`]: CSV and Markdown output of backtest results.
//! - [`synth`]: spiked-covariance factor model used for synthetic markets.

pub mod backtest;
pub mod cov_shrinkage;
pub mod dea;
pub mod error;
pub mod market_data;
pub mod mean_shrinkage;
pub mod metrics;
pub mod numerics;
pub mod portfolio_opt;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
