use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{max_asymmetry, symmetrize, ZERO_CLAMP};
use crate::{Error, Result};

/// Default relative rank cutoff for [`pinv`].
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;

/// Spectral decomposition `A = U diag(λ) Uᵀ` with ascending eigenvalues.
///
/// Each eigenvector is sign-normalised so that its largest-magnitude entry
/// (first one on ties) is positive, which makes the output reproducible.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `U diag(f(λ)) Uᵀ`
    pub fn reconstruct_with(&self, diag: &DVector<f64>) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * diag[j]
        });
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(&self.values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn sym_eigen(matrix: &DMatrix<f64>) -> Result<SymEigen> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            actual: matrix.ncols(),
        });
    }
    let scale = matrix.amax().max(1.0);
    let asym = max_asymmetry(matrix);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let p = matrix.nrows();
    if p == 0 {
        return Ok(SymEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }

    let decomposition = SymmetricEigen::new(symmetrize(matrix));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        decomposition.eigenvalues[a]
            .total_cmp(&decomposition.eigenvalues[b])
            .then(a.cmp(&b))
    });

    let mut values = DVector::zeros(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut value = decomposition.eigenvalues[src];
        if value < 0.0 && value >= -ZERO_CLAMP {
            value = 0.0;
        }
        values[dst] = value;

        let column = decomposition.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..p {
            if column[i].abs() > column[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if column[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            vectors[(i, dst)] = sign * column[i];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
///
/// Eigenvalues at or below `rank_tol * λ_max` are treated as zero.
pub fn pinv(matrix: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(matrix)?;
    Ok(pinv_from_eigen(&eig, rank_tol))
}

pub fn pinv_from_eigen(eig: &SymEigen, rank_tol: f64) -> DMatrix<f64> {
    let p = eig.dim();
    if p == 0 {
        return DMatrix::zeros(0, 0);
    }
    let lambda_max = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cutoff = rank_tol * lambda_max;
    let inverted = eig.values.map(|v| {
        if v.abs() > cutoff && v != 0.0 {
            1.0 / v
        } else {
            0.0
        }
    });
    eig.reconstruct_with(&inverted)
}
