//! Convex QP over the unit simplex: `min xᵀQx + cᵀx` s.t. `Σx = 1, x ≥ 0`.
//!
//! Primal active-set method started from the equal-weight point. Each
//! iteration solves the equality-constrained subproblem on the free set via a
//! Cholesky factorisation of `Q_FF + δI`, where `δ` is a ridge of `1e-12`
//! times the mean diagonal of `Q`. The ridge keeps singular covariance
//! matrices (p ≥ n) solvable and moves the optimum by O(δ).

use nalgebra::{DMatrix, DVector};

use super::{max_asymmetry, sym_eigen};
use crate::{Error, Result};

const RIDGE: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-13;
const MULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QpProblem {
    /// Symmetric PSD `Q`.
    pub quad: DMatrix<f64>,
    /// Linear term `c`.
    pub linear: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub value: f64,
    /// Multiplier of the budget constraint.
    pub budget_multiplier: f64,
    pub iterations: usize,
}

impl QpProblem {
    pub fn new(quad: DMatrix<f64>, linear: DVector<f64>) -> Self {
        Self { quad, linear }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.quad * x)[(0, 0)] + self.linear.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.quad * x * 2.0 + &self.linear
    }
}

impl QpSolution {
    /// Max violation of the KKT conditions (stationarity on the support,
    /// dual feasibility off it, complementarity, primal feasibility).
    pub fn kkt_residual(&self, problem: &QpProblem) -> f64 {
        let g = problem.gradient(&self.x);
        let nu = self.budget_multiplier;
        let mut worst = (self.x.sum() - 1.0).abs();
        for i in 0..self.x.len() {
            let s = g[i] - nu;
            worst = worst.max(-self.x[i]);
            worst = worst.max(-s);
            worst = worst.max((s * self.x[i]).abs());
        }
        worst
    }
}

/// Solves the simplex-constrained QP to global optimality.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    let p = problem.dim();
    if p == 0 {
        return Err(Error::InvalidParameter("empty QP".into()));
    }
    if problem.quad.nrows() != p || problem.quad.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: problem.quad.nrows(),
        });
    }
    if problem
        .quad
        .iter()
        .chain(problem.linear.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidParameter("non-finite QP data".into()));
    }
    let scale = problem.quad.amax();
    if max_asymmetry(&problem.quad) > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(max_asymmetry(&problem.quad)));
    }
    let eig = sym_eigen(&problem.quad)?;
    let min_eig = eig.values[0];
    let max_eig = eig.values[p - 1].abs();
    if min_eig < -PSD_TOL * max_eig.max(1.0) {
        return Err(Error::NotPsd(min_eig));
    }

    let mean_diag = problem.quad.diagonal().mean();
    if mean_diag <= 0.0 {
        return Ok(linear_vertex(problem));
    }
    let ridge = RIDGE * mean_diag;

    let mut x = DVector::from_element(p, 1.0 / p as f64);
    let mut free = vec![true; p];
    let limit = 50 * p + 100;

    for iteration in 0..limit {
        let (candidate, nu) = equality_step(problem, &free, ridge)?;

        let mut step = 1.0;
        let mut blocking = None;
        for i in 0..p {
            if free[i] && candidate[i] < x[i] && candidate[i] < -FEAS_TOL {
                let t = x[i] / (x[i] - candidate[i]);
                if t < step {
                    step = t;
                    blocking = Some(i);
                }
            }
        }

        if let Some(b) = blocking {
            x = &x + (&candidate - &x) * step;
            x[b] = 0.0;
            free[b] = false;
            for i in 0..p {
                if free[i] && x[i] < 0.0 {
                    x[i] = 0.0;
                }
            }
            continue;
        }

        x = candidate;
        for i in 0..p {
            if !free[i] || x[i] < 0.0 {
                x[i] = x[i].max(0.0);
            }
        }
        let total = x.sum();
        x /= total;

        // Price the bound variables: s_i = g_i - ν must be non-negative.
        let g = problem.gradient(&x);
        let tol = MULT_TOL * (1.0 + g.amax() + nu.abs());
        let mut entering = None;
        let mut most_negative = -tol;
        for i in 0..p {
            if !free[i] {
                let s = g[i] - nu;
                if s < most_negative {
                    most_negative = s;
                    entering = Some(i);
                }
            }
        }
        match entering {
            Some(i) => free[i] = true,
            None => {
                return Ok(QpSolution {
                    value: problem.objective(&x),
                    budget_multiplier: nu,
                    x,
                    iterations: iteration + 1,
                });
            }
        }
    }
    Err(Error::Solver(format!(
        "active-set QP did not converge in {limit} iterations"
    )))
}

/// Solves `2(Q_FF + δI)x_F + c_F = ν·1`, `1ᵀx_F = 1`, with `x_i = 0` off the free set.
fn equality_step(problem: &QpProblem, free: &[bool], ridge: f64) -> Result<(DVector<f64>, f64)> {
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let k = idx.len();
    let mut h = DMatrix::<f64>::zeros(k, k);
    let mut c = DVector::<f64>::zeros(k);
    for (a, &i) in idx.iter().enumerate() {
        c[a] = problem.linear[i];
        for (b, &j) in idx.iter().enumerate() {
            h[(a, b)] = 2.0 * problem.quad[(i, j)];
        }
        h[(a, a)] += 2.0 * ridge;
    }
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Solver("QP subproblem factorisation failed".into()))?;
    let ones = DVector::from_element(k, 1.0);
    let h_inv_one = chol.solve(&ones);
    let h_inv_c = chol.solve(&c);
    let denom = h_inv_one.sum();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Solver("QP subproblem is degenerate".into()));
    }
    let nu = (1.0 + h_inv_c.sum()) / denom;
    let x_free = h_inv_one * nu - h_inv_c;
    let mut x = DVector::zeros(free.len());
    for (a, &i) in idx.iter().enumerate() {
        x[i] = x_free[a];
    }
    Ok((x, nu))
}

/// `Q = 0`: the optimum is the vertex with the smallest linear cost.
fn linear_vertex(problem: &QpProblem) -> QpSolution {
    let mut best = 0;
    for i in 1..problem.dim() {
        if problem.linear[i] < problem.linear[best] {
            best = i;
        }
    }
    let mut x = DVector::zeros(problem.dim());
    x[best] = 1.0;
    QpSolution {
        value: problem.linear[best],
        budget_multiplier: problem.linear[best],
        x,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_gives_equal_weights() {
        let qp = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(3));
        let sol = solve_qp(&qp).unwrap();
        for v in sol.x.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn feasible_unconstrained_optimum_is_a_vertex() {
        // (x - e1)ᵀ(x - e1) = xᵀx - 2x₁ + 1
        let linear = DVector::from_vec(vec![-2.0, 0.0, 0.0]);
        let qp = QpProblem::new(DMatrix::identity(3, 3), linear);
        let sol = solve_qp(&qp).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-10);
        assert!(sol.x[1].abs() < 1e-10 && sol.x[2].abs() < 1e-10);
        assert!(sol.kkt_residual(&qp) < 1e-8);
    }

    #[test]
    fn diagonal_inverse_variance() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let sol = solve_qp(&QpProblem::new(q, DVector::zeros(2))).unwrap();
        assert!((sol.x[0] - 0.8).abs() < 1e-10);
        assert!((sol.x[1] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn rejects_indefinite() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            solve_qp(&QpProblem::new(q, DVector::zeros(2))),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn zero_quadratic_picks_cheapest_vertex() {
        let qp = QpProblem::new(
            DMatrix::zeros(3, 3),
            DVector::from_vec(vec![0.3, -0.1, 0.2]),
        );
        let sol = solve_qp(&qp).unwrap();
        assert_eq!(sol.x.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn singular_covariance_is_solved() {
        // rank-one Q: any x with aᵀx = 0 has zero variance
        let a = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        let q = &a * a.transpose();
        let qp = QpProblem::new(q, DVector::zeros(3));
        let sol = solve_qp(&qp).unwrap();
        assert!(sol.value.abs() < 1e-10);
        assert!(sol.kkt_residual(&qp) < 1e-8);
    }
}
