//! Dense two-phase primal simplex.
//!
//! Pivoting uses Dantzig's rule with lowest-index tie-breaking and falls back
//! to Bland's rule after a run of degenerate pivots, so results are fully
//! deterministic for a given problem. Once the optimal basis is known, the
//! primal point and the duals are recomputed from the original data with an
//! LU solve on the basis matrix, which removes tableau round-off.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPTIMALITY_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

/// `min/max cᵀx` subject to linear rows and per-variable sign restrictions.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub bounds: Vec<VarBound>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value at `x` (NaN unless optimal).
    pub value: f64,
    pub x: Vec<f64>,
    /// One multiplier per constraint, in the problem's own sense:
    /// `c = Aᵀy + r` with `r` the reduced costs of the variables.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpProblem {
    /// All variables non-negative, no constraints yet.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            bounds: vec![VarBound::NonNegative; n],
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_free(&mut self, var: usize) {
        self.bounds[var] = VarBound::Free;
    }

    pub fn add(&mut self, coefficients: Vec<f64>, kind: ConstraintKind, rhs: f64) {
        self.constraints.push(Constraint {
            coefficients,
            kind,
            rhs,
        });
    }

    pub fn add_le(&mut self, coefficients: Vec<f64>, rhs: f64) {
        self.add(coefficients, ConstraintKind::Le, rhs);
    }

    pub fn add_ge(&mut self, coefficients: Vec<f64>, rhs: f64) {
        self.add(coefficients, ConstraintKind::Ge, rhs);
    }

    pub fn add_eq(&mut self, coefficients: Vec<f64>, rhs: f64) {
        self.add(coefficients, ConstraintKind::Eq, rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.bounds.len(),
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite objective coefficient".into(),
            ));
        }
        for c in &self.constraints {
            if c.coefficients.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: c.coefficients.len(),
                });
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "non-finite constraint coefficient".into(),
                ));
            }
        }
        Ok(())
    }
}

impl LpSolution {
    /// Largest violation of any constraint or sign restriction at `x`.
    pub fn primal_residual(&self, problem: &LpProblem) -> f64 {
        let mut worst = 0.0_f64;
        for c in &problem.constraints {
            let lhs: f64 = c.coefficients.iter().zip(&self.x).map(|(a, x)| a * x).sum();
            let violation = match c.kind {
                ConstraintKind::Le => lhs - c.rhs,
                ConstraintKind::Ge => c.rhs - lhs,
                ConstraintKind::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(violation);
        }
        for (x, b) in self.x.iter().zip(&problem.bounds) {
            if *b == VarBound::NonNegative {
                worst = worst.max(-x);
            }
        }
        worst
    }

    /// Largest `|y_i·slack_i|` or `|r_j·x_j|` product.
    pub fn complementary_slackness_residual(&self, problem: &LpProblem) -> f64 {
        let n = problem.n_vars();
        let mut reduced = problem.objective.clone();
        let mut worst = 0.0_f64;
        for (c, y) in problem.constraints.iter().zip(&self.duals) {
            let lhs: f64 = c.coefficients.iter().zip(&self.x).map(|(a, x)| a * x).sum();
            worst = worst.max((y * (lhs - c.rhs)).abs());
            for j in 0..n {
                reduced[j] -= y * c.coefficients[j];
            }
        }
        for j in 0..n {
            worst = worst.max((reduced[j] * self.x[j]).abs());
        }
        worst
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.at(row, col);
        {
            let pivot_row = &mut self.data[row * w..(row + 1) * w];
            for v in pivot_row.iter_mut() {
                *v /= p;
            }
        }
        let pivot_row: Vec<f64> = self.data[row * w..(row + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let factor = self.data[r * w + col];
            if factor != 0.0 {
                let target = &mut self.data[r * w..(r + 1) * w];
                for (t, pv) in target.iter_mut().zip(&pivot_row) {
                    *t -= factor * pv;
                }
                target[col] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (t, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *t -= factor * pv;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Sets the objective row to the reduced costs of `costs` under the current basis.
    fn price(&mut self, costs: &[f64]) {
        let w = self.width;
        self.obj = costs.to_vec();
        self.obj.push(0.0);
        for r in 0..self.rows {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.obj[c] -= cb * self.data[r * w + c];
                }
            }
        }
    }

    /// Runs simplex iterations on the current objective row.
    /// Returns `Ok(true)` at optimality and `Ok(false)` if unbounded.
    fn optimize(&mut self, allowed: usize, iterations: &mut usize, limit: usize) -> Result<bool> {
        let mut degenerate_run = 0usize;
        loop {
            if *iterations >= limit {
                return Err(Error::Solver(format!(
                    "simplex iteration limit {limit} reached"
                )));
            }
            let bland = degenerate_run >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -OPTIMALITY_TOL;
            for c in 0..allowed {
                let d = self.obj[c];
                if d < -OPTIMALITY_TOL {
                    if bland {
                        entering = Some(c);
                        break;
                    }
                    if d < best {
                        best = d;
                        entering = Some(c);
                    }
                }
            }
            let Some(col) = entering else {
                return Ok(true);
            };

            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    match leaving {
                        None => leaving = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if (!tie && ratio < lratio) || (tie && self.basis[r] < self.basis[lr]) {
                                leaving = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return Ok(false);
            };
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
            *iterations += 1;
        }
    }
}

/// Solves an LP. Infeasibility and unboundedness are reported through
/// [`LpSolution::status`]; only malformed input or an iteration overrun is an error.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.n_vars();
    let m = problem.constraints.len();

    // Standard form: structural columns (free vars split), then slacks.
    let mut column_of = Vec::with_capacity(n);
    let mut n_struct = 0usize;
    for b in &problem.bounds {
        column_of.push(n_struct);
        n_struct += if *b == VarBound::Free { 2 } else { 1 };
    }
    let n_slack = problem
        .constraints
        .iter()
        .filter(|c| c.kind != ConstraintKind::Eq)
        .count();
    let n_real = n_struct + n_slack;

    let sense_sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut costs = vec![0.0; n_real];
    for j in 0..n {
        let c = sense_sign * problem.objective[j];
        costs[column_of[j]] = c;
        if problem.bounds[j] == VarBound::Free {
            costs[column_of[j] + 1] = -c;
        }
    }

    let mut a_std = DMatrix::<f64>::zeros(m, n_real);
    let mut b_std = DVector::<f64>::zeros(m);
    let mut row_sign = vec![1.0; m];
    let mut natural_basis: Vec<Option<usize>> = vec![None; m];
    let mut slack = n_struct;
    for (i, c) in problem.constraints.iter().enumerate() {
        let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
        row_sign[i] = sign;
        for j in 0..n {
            let a = sign * c.coefficients[j];
            a_std[(i, column_of[j])] = a;
            if problem.bounds[j] == VarBound::Free {
                a_std[(i, column_of[j] + 1)] = -a;
            }
        }
        match c.kind {
            ConstraintKind::Le | ConstraintKind::Ge => {
                let coef = if c.kind == ConstraintKind::Le {
                    1.0
                } else {
                    -1.0
                } * sign;
                a_std[(i, slack)] = coef;
                if coef > 0.0 {
                    natural_basis[i] = Some(slack);
                }
                slack += 1;
            }
            ConstraintKind::Eq => {}
        }
        b_std[i] = sign * c.rhs;
    }

    let artificial_rows: Vec<usize> = (0..m).filter(|&i| natural_basis[i].is_none()).collect();
    let n_art = artificial_rows.len();
    let width = n_real + n_art + 1;
    let mut data = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    for i in 0..m {
        for j in 0..n_real {
            data[i * width + j] = a_std[(i, j)];
        }
        data[i * width + width - 1] = b_std[i];
        if let Some(col) = natural_basis[i] {
            basis[i] = col;
        }
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        data[i * width + n_real + k] = 1.0;
        basis[i] = n_real + k;
    }
    let mut tableau = Tableau {
        rows: m,
        width,
        data,
        obj: Vec::new(),
        basis,
    };

    let limit = 50 * (m + width) + 1000;
    let mut iterations = 0usize;

    if n_art > 0 {
        let mut phase1 = vec![0.0; n_real + n_art];
        for v in phase1.iter_mut().skip(n_real) {
            *v = 1.0;
        }
        tableau.price(&phase1);
        tableau.optimize(n_real + n_art, &mut iterations, limit)?;
        let infeasibility = -tableau.obj[width - 1];
        let scale = 1.0 + b_std.amax();
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                x: vec![f64::NAN; n],
                duals: vec![f64::NAN; m],
                iterations,
            });
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            if tableau.basis[r] >= n_real {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..n_real {
                    let a = tableau.at(r, c).abs();
                    if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                        best = Some((c, a));
                    }
                }
                if let Some((c, _)) = best {
                    tableau.pivot(r, c);
                    iterations += 1;
                }
            }
        }
    }

    let mut phase2 = costs.clone();
    phase2.extend(std::iter::repeat_n(0.0, n_art));
    tableau.price(&phase2);
    let bounded = tableau.optimize(n_real, &mut iterations, limit)?;
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: match problem.sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
            x: vec![f64::NAN; n],
            duals: vec![f64::NAN; m],
            iterations,
        });
    }

    // Recover primal and dual values from the basis with the original data.
    let mut basis_matrix = DMatrix::<f64>::zeros(m, m);
    let mut basis_costs = DVector::<f64>::zeros(m);
    for (k, &col) in tableau.basis.iter().enumerate() {
        if col < n_real {
            basis_matrix.set_column(k, &a_std.column(col));
            basis_costs[k] = costs[col];
        } else {
            let row = artificial_rows[col - n_real];
            basis_matrix[(row, k)] = 1.0;
        }
    }
    let lu = basis_matrix.clone().lu();
    let x_basic = lu
        .solve(&b_std)
        .unwrap_or_else(|| DVector::from_fn(m, |r, _| tableau.rhs(r)));
    let y_std = basis_matrix
        .transpose()
        .lu()
        .solve(&basis_costs)
        .unwrap_or_else(|| DVector::zeros(m));

    let mut z = vec![0.0; n_real];
    for (k, &col) in tableau.basis.iter().enumerate() {
        if col < n_real {
            z[col] = x_basic[k].max(0.0);
        }
    }
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = z[column_of[j]];
        if problem.bounds[j] == VarBound::Free {
            x[j] -= z[column_of[j] + 1];
        }
    }
    let duals: Vec<f64> = (0..m)
        .map(|i| sense_sign * row_sign[i] * y_std[i])
        .collect();
    let value = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
        duals,
        iterations,
    })
}
