//! Brute-force optimisation oracles for small instances.

use super::Mat;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Mat = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// `min cᵀx` s.t. `A x ≤ b`, `E x = d`, `x ≥ 0`, by enumerating every
/// basic point. Returns `None` if infeasible. Assumes boundedness.
pub fn lp_min_by_vertices(
    c: &[f64],
    a: &Mat,
    b: &[f64],
    e: &Mat,
    d: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    // candidate active rows: inequality rows then bounds x_i ≥ 0
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().cloned()).collect();
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = 1.0;
        rows.push((r, 0.0));
    }
    let free = n - e.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(rows.len(), free, &mut |pick| {
        let mut mat: Mat = e.clone();
        let mut rhs: Vec<f64> = d.to_vec();
        for &k in pick {
            mat.push(rows[k].0.clone());
            rhs.push(rows[k].1);
        }
        let Some(x) = solve_dense(&mat, &rhs) else {
            return;
        };
        let tol = 1e-9;
        if x.iter().any(|v| *v < -tol) {
            return;
        }
        for (row, bi) in a.iter().zip(b) {
            if row.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() > bi + tol {
                return;
            }
        }
        let val: f64 = c.iter().zip(&x).map(|(u, v)| u * v).sum();
        if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
            best = Some((val, x));
        }
    });
    best
}

/// Minimum of a piecewise-linear function on the 3-asset simplex, whose
/// pieces are separated by hyperplanes `hᵀx = 0`. The minimum sits at a
/// vertex of the arrangement formed by those hyperplanes and the simplex edges.
pub fn simplex3_arrangement_min(
    breaks: &[[f64; 3]],
    f: &dyn Fn(&[f64; 3]) -> f64,
) -> (f64, [f64; 3]) {
    let mut planes: Vec<[f64; 3]> = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    planes.extend_from_slice(breaks);
    let mut best = (f64::INFINITY, [0.0; 3]);
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            let a = vec![planes[i].to_vec(), planes[j].to_vec(), vec![1.0, 1.0, 1.0]];
            let Some(x) = solve_dense(&a, &[0.0, 0.0, 1.0]) else {
                continue;
            };
            if x.iter().any(|v| *v < -1e-12) {
                continue;
            }
            let x = [x[0].max(0.0), x[1].max(0.0), x[2].max(0.0)];
            let v = f(&x);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    best
}

pub fn scenario_mean(r: &Mat) -> Vec<f64> {
    let n = r.len() as f64;
    (0..r[0].len())
        .map(|j| r.iter().map(|row| row[j]).sum::<f64>() / n)
        .collect()
}

fn port(row: &[f64], x: &[f64; 3]) -> f64 {
    row.iter().zip(x).map(|(a, b)| a * b).sum()
}

pub fn smad_objective(r: &Mat, x: &[f64; 3]) -> f64 {
    let m = scenario_mean(r);
    let mean = port(&m, x);
    r.iter()
        .map(|row| (mean - port(row, x)).max(0.0))
        .sum::<f64>()
        / r.len() as f64
}

/// Exact `min_β β + 1/(αn)Σ(−β − r_jᵀx)_+ − r̄ᵀx`: the inner minimum is at a kink.
pub fn cvar_objective(r: &Mat, alpha: f64, x: &[f64; 3]) -> f64 {
    let n = r.len() as f64;
    let m = scenario_mean(r);
    let rets: Vec<f64> = r.iter().map(|row| port(row, x)).collect();
    let inner = rets
        .iter()
        .map(|&k| {
            let beta = -k;
            beta + rets.iter().map(|&q| (-beta - q).max(0.0)).sum::<f64>() / (alpha * n)
        })
        .fold(f64::INFINITY, f64::min);
    inner - port(&m, x)
}

pub fn minimax_objective(r: &Mat, x: &[f64; 3]) -> f64 {
    let m = scenario_mean(r);
    let worst = r
        .iter()
        .map(|row| port(row, x))
        .fold(f64::INFINITY, f64::min);
    -worst - port(&m, x)
}

pub fn smad_breaks(r: &Mat) -> Vec<[f64; 3]> {
    let m = scenario_mean(r);
    r.iter()
        .map(|row| [m[0] - row[0], m[1] - row[1], m[2] - row[2]])
        .collect()
}

pub fn pairwise_breaks(r: &Mat) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            out.push([r[i][0] - r[j][0], r[i][1] - r[j][1], r[i][2] - r[j][2]]);
        }
    }
    out
}

/// `min xᵀQx + cᵀx` on the simplex: exhaustive grid of step `1/steps`, then
/// pairwise-exchange descent with halving steps (exact for convex objectives).
pub fn qp_grid(q: &Mat, c: &[f64], steps: usize) -> Vec<f64> {
    let p = c.len();
    let obj = |x: &[f64]| {
        let mut v = 0.0;
        for i in 0..p {
            v += c[i] * x[i];
            for j in 0..p {
                v += x[i] * q[i][j] * x[j];
            }
        }
        v
    };
    let mut best = vec![1.0 / p as f64; p];
    let mut best_v = obj(&best);
    let mut counts = vec![0usize; p];
    fn walk(
        k: usize,
        left: usize,
        counts: &mut Vec<usize>,
        steps: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        let p = counts.len();
        if k == p - 1 {
            counts[k] = left;
            visit(counts);
            return;
        }
        for v in 0..=left {
            counts[k] = v;
            walk(k + 1, left - v, counts, steps, visit);
        }
    }
    walk(0, steps, &mut counts, steps, &mut |cnt| {
        let x: Vec<f64> = cnt.iter().map(|&k| k as f64 / steps as f64).collect();
        let v = obj(&x);
        if v < best_v {
            best_v = v;
            best = x;
        }
    });
    let mut step = 1.0 / steps as f64;
    while step > 1e-9 {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..p {
                for j in 0..p {
                    if i == j || best[j] <= 0.0 {
                        continue;
                    }
                    let t = step.min(best[j]);
                    let mut x = best.clone();
                    x[i] += t;
                    x[j] -= t;
                    let v = obj(&x);
                    if v < best_v - 1e-18 {
                        best_v = v;
                        best = x;
                        improved = true;
                    }
                }
            }
        }
        step /= 2.0;
    }
    best
}
