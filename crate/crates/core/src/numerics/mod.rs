//! Dense numerical kernels shared by the estimators and portfolio models.

mod eigen;
mod lp;
mod qp;

pub use eigen::{pinv, pinv_from_eigen as eigen_pinv, sym_eigen, SymEigen, DEFAULT_RANK_TOL};
pub use lp::{
    solve_lp, Constraint, ConstraintKind, LpProblem, LpSolution, LpStatus, Sense, VarBound,
};
pub use qp::{solve_qp, QpProblem, QpSolution};

use nalgebra::DMatrix;

/// Eigenvalues in `[-ZERO_CLAMP, 0)` are treated as exact zeros.
pub const ZERO_CLAMP: f64 = 1e-12;

/// Largest absolute asymmetry `|a_ij - a_ji|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(m + mᵀ) / 2`
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `a - b` divided by the Frobenius norm of `b` (or 1 if `b` is zero).
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm();
    let diff = (a - b).norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
