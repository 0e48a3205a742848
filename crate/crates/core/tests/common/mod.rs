//! Independent reference implementations shared by the integration suites.
//!
//! Everything here works on plain `Vec<Vec<f64>>` with explicit loops and a
//! cyclic Jacobi eigensolver, so none of it shares code paths with the
//! library under test.

#![allow(dead_code)]

pub mod oracle;
pub mod vertex;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Mat = Vec<Vec<f64>>;

pub fn to_vecs(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn to_dmatrix(m: &Mat) -> DMatrix<f64> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    DMatrix::from_fn(rows, cols, |i, j| m[i][j])
}

/// Max-abs difference divided by the max-abs of the reference.
pub fn rel_err(actual: &DMatrix<f64>, reference: &Mat) -> f64 {
    let mut diff = 0.0_f64;
    let mut scale = 0.0_f64;
    for (i, row) in reference.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            diff = diff.max((actual[(i, j)] - r).abs());
            scale = scale.max(r.abs());
        }
    }
    diff / scale.max(f64::MIN_POSITIVE)
}

pub fn rel_err_vec(actual: &[f64], reference: &[f64]) -> f64 {
    let diff = actual
        .iter()
        .zip(reference)
        .map(|(a, r)| (a - r).abs())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|r| r.abs()).fold(0.0, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Gaussian data with a few strong common factors and per-asset drifts,
/// generated without the library's synthetic-market module.
pub fn factor_returns(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let k = 2;
    let loadings: Vec<Vec<f64>> = (0..p).map(|_| (0..k).map(|_| z()).collect()).collect();
    let drift: Vec<f64> = (0..p).map(|_| 5e-4 * z()).collect();
    let vol: Vec<f64> = (0..p).map(|_| 0.008 + 0.004 * z().abs()).collect();
    let mut out = DMatrix::zeros(n, p);
    for t in 0..n {
        let f: Vec<f64> = (0..k).map(|_| 0.01 * z()).collect();
        for i in 0..p {
            let common: f64 = (0..k).map(|l| loadings[i][l] * f[l]).sum();
            out[(t, i)] = drift[i] + common + vol[i] * z();
        }
    }
    out
}
