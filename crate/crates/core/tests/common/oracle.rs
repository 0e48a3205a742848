//! Direct-formula estimator oracles.

use std::f64::consts::PI;

use super::Mat;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn transpose(a: &Mat) -> Mat {
    let (r, c) = (a.len(), a[0].len());
    let mut t = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            t[j][i] = a[i][j];
        }
    }
    t
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(r, c);
    for i in 0..r {
        for l in 0..k {
            let ail = a[i][l];
            for j in 0..c {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Cyclic Jacobi. Returns ascending eigenvalues and eigenvectors as columns.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut m = a.clone();
    let mut v = zeros(n, n);
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let total: f64 = m.iter().flatten().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i][j] * m[i][j];
                }
            }
        }
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n)
        .map(|r| order.iter().map(|&i| v[r][i]).collect())
        .collect();
    (values, vectors)
}

/// `U diag(d) Uᵀ`
pub fn recompose(u: &Mat, d: &[f64]) -> Mat {
    let n = u.len();
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..d.len()).map(|k| u[i][k] * d[k] * u[j][k]).sum();
        }
    }
    out
}

pub fn pinv(s: &Mat) -> Mat {
    let (vals, vecs) = jacobi_eigen(s);
    let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let inv: Vec<f64> = vals
        .iter()
        .map(|&v| if v.abs() > 1e-12 * top { 1.0 / v } else { 0.0 })
        .collect();
    recompose(&vecs, &inv)
}

pub struct Moments {
    pub n: usize,
    pub p: usize,
    pub raw: Mat,
    pub mean: Vec<f64>,
    /// demeaned data
    pub y: Mat,
    pub s: Mat,
}

pub fn moments(r: &Mat) -> Moments {
    let n = r.len();
    let p = r[0].len();
    let mean: Vec<f64> = (0..p)
        .map(|j| r.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    let y: Mat = r
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut s = zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            s[i][j] = (0..n).map(|t| y[t][i] * y[t][j]).sum::<f64>() / n as f64;
        }
    }
    Moments {
        n,
        p,
        raw: r.clone(),
        mean,
        y,
        s,
    }
}

// ---- means ----

pub struct MeanOracle {
    pub mu: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

fn stein(m: &Moments) -> (f64, f64) {
    let si = pinv(&m.s);
    let ones = vec![1.0; m.p];
    let si1 = matvec(&si, &ones);
    let den = dot(&ones, &si1);
    let r0 = if den > 0.0 {
        dot(&m.mean, &si1) / den
    } else {
        m.mean.iter().sum::<f64>() / m.p as f64
    };
    let d: Vec<f64> = m.mean.iter().map(|v| v - r0).collect();
    let q = dot(&d, &matvec(&si, &d)).max(0.0);
    (r0, q)
}

pub fn js(m: &Moments) -> MeanOracle {
    let (r0, q) = stein(m);
    let a = if q > 0.0 {
        ((m.p as f64 - 2.0) / (m.n as f64 * q)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    MeanOracle {
        mu: m.mean.iter().map(|v| a * r0 + (1.0 - a) * v).collect(),
        alpha: a,
        beta: 1.0 - a,
    }
}

pub fn bs(m: &Moments) -> MeanOracle {
    let (r0, q) = stein(m);
    let p = m.p as f64;
    let a = (p + 2.0) / (p + 2.0 + m.n as f64 * q);
    MeanOracle {
        mu: m.mean.iter().map(|v| a * r0 + (1.0 - a) * v).collect(),
        alpha: a,
        beta: 1.0 - a,
    }
}

/// Explicit double sums over `i ≠ j`.
pub fn quad(m: &Moments) -> MeanOracle {
    let si = pinv(&m.s);
    let (n, p) = (m.n, m.p);
    let (nf, pf) = (n as f64, p as f64);
    let sr: Vec<Vec<f64>> = m.raw.iter().map(|row| matvec(&si, row)).collect();
    let ones = vec![1.0; p];
    let s1 = matvec(&si, &ones);
    let one_s_one = dot(&ones, &s1);
    let mut cross = 0.0;
    let mut diag = 0.0;
    let mut r4_sum = 0.0;
    for i in 0..n {
        diag += dot(&m.raw[i], &sr[i]);
        for j in 0..n {
            if i != j {
                cross += dot(&m.raw[i], &sr[j]);
                r4_sum += dot(&s1, &m.raw[i]) * dot(&m.raw[j], &s1);
            }
        }
    }
    let r1 = cross / (pf * (nf - 1.0));
    let r2 = (diag - cross / (nf - 1.0)) / (nf * pf);
    let r3 = (0..n).map(|k| dot(&ones, &sr[k])).sum::<f64>() / (nf * one_s_one);
    let r4 = r4_sum / (pf * (nf - 1.0) * one_s_one);
    let den = r1 + r2 - r3;
    let level = r2 * r4 / den;
    let w = (r1 - r3) / den;
    MeanOracle {
        mu: m.mean.iter().map(|v| level + w * v).collect(),
        alpha: w,
        beta: level,
    }
}

pub fn bop(m: &Moments, eps: f64) -> MeanOracle {
    let si = pinv(&m.s);
    let nf = m.n as f64;
    let c = m.p as f64 / nf;
    let mu0 = vec![nf.powf((eps - 1.0) / 2.0); m.p];
    let rr = dot(&m.mean, &matvec(&si, &m.mean));
    let mm = dot(&mu0, &matvec(&si, &mu0));
    let rm = dot(&m.mean, &matvec(&si, &mu0));
    let beta = ((rr - c / (1.0 - c)) * mm - rm * rm) / (rr * mm - rm * rm);
    let alpha = (1.0 - beta) * rm / mm;
    MeanOracle {
        mu: (0..m.p)
            .map(|i| alpha * mu0[i] + beta * m.mean[i])
            .collect(),
        alpha,
        beta,
    }
}

// ---- covariances ----

pub fn ls(m: &Moments) -> (Mat, f64) {
    let p = m.p as f64;
    let frob: f64 = m.s.iter().flatten().map(|v| v * v).sum();
    let tr: f64 = (0..m.p).map(|i| m.s[i][i]).sum();
    // ‖Σ₀‖²_F = 1/p, ‖SΣ₀‖_tr = tr(S)/p
    let den = frob / p - (tr / p).powi(2);
    let alpha = (1.0 - tr * tr / p / (m.n as f64 * den)).clamp(0.0, 1.0);
    let beta = (tr / p) / (1.0 / p) * (1.0 - alpha);
    let mut out = zeros(m.p, m.p);
    for i in 0..m.p {
        for j in 0..m.p {
            out[i][j] = alpha * m.s[i][j] + if i == j { beta / p } else { 0.0 };
        }
    }
    (out, alpha)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Lw {
    Cov1,
    Cov2,
    CovCor,
    CovDiag,
    CovMkt,
}

/// Returns `(Σ̂, λ̂)`.
pub fn lw(m: &Moments, kind: Lw) -> (Mat, f64) {
    let (n, p) = (m.n, m.p);
    let (nf, pf) = (n as f64, p as f64);
    let y = &m.y;
    let s = &m.s;
    let s2 = |i: usize, j: usize| {
        (0..n)
            .map(|t| y[t][i].powi(2) * y[t][j].powi(2))
            .sum::<f64>()
            / nf
    };
    let mut pi = 0.0;
    for i in 0..p {
        for j in 0..p {
            pi += s2(i, j) - s[i][j].powi(2);
        }
    }
    let rho_diag: f64 = (0..p).map(|i| s2(i, i) - s[i][i].powi(2)).sum();
    let vbar = (0..p).map(|i| s[i][i]).sum::<f64>() / pf;
    let mut t = zeros(p, p);
    let rho;
    match kind {
        Lw::Cov1 => {
            for i in 0..p {
                t[i][i] = vbar;
            }
            rho = 0.0;
        }
        Lw::CovDiag => {
            for i in 0..p {
                t[i][i] = s[i][i];
            }
            rho = rho_diag;
        }
        Lw::Cov2 => {
            let mut off = 0.0;
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        off += s[i][j];
                    }
                }
            }
            let cbar = off / (pf * (pf - 1.0));
            for i in 0..p {
                for j in 0..p {
                    t[i][j] = if i == j { vbar } else { cbar };
                }
            }
            let mut quartic = 0.0;
            for row in y.iter() {
                let sum: f64 = row.iter().sum();
                let sq: f64 = row.iter().map(|v| v * v).sum();
                quartic += (sum * sum - sq).powi(2);
            }
            rho = rho_diag + (quartic / (pf * nf) - off * off / pf) / (pf - 1.0);
        }
        Lw::CovCor => {
            let mut rsum = 0.0;
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        rsum += s[i][j] / (s[i][i] * s[j][j]).sqrt();
                    }
                }
            }
            let rbar = rsum / (pf * (pf - 1.0));
            for i in 0..p {
                for j in 0..p {
                    t[i][j] = if i == j {
                        s[i][i]
                    } else {
                        rbar * (s[i][i] * s[j][j]).sqrt()
                    };
                }
            }
            let mut acc = 0.0;
            for i in 0..p {
                for j in 0..p {
                    if i == j {
                        continue;
                    }
                    let third = (0..n).map(|k| y[k][i].powi(3) * y[k][j]).sum::<f64>() / nf;
                    let gamma = third - s[i][i] * s[i][j];
                    acc += (s[j][j] / s[i][i]).sqrt() * gamma;
                }
            }
            rho = rho_diag + rbar * acc;
        }
        Lw::CovMkt => {
            let mkt: Vec<f64> = y.iter().map(|row| row.iter().sum::<f64>() / pf).collect();
            let var_m = mkt.iter().map(|v| v * v).sum::<f64>() / nf;
            let cov_m: Vec<f64> = (0..p)
                .map(|i| (0..n).map(|k| y[k][i] * mkt[k]).sum::<f64>() / nf)
                .collect();
            for i in 0..p {
                for j in 0..p {
                    t[i][j] = if i == j {
                        s[i][i]
                    } else {
                        cov_m[i] * cov_m[j] / var_m
                    };
                }
            }
            let k1 = |i: usize, j: usize| {
                (0..n)
                    .map(|k| y[k][i].powi(2) * y[k][j] * mkt[k])
                    .sum::<f64>()
                    / nf
                    - cov_m[i] * s[i][j]
            };
            let k2 = |i: usize, j: usize| {
                (0..n)
                    .map(|k| y[k][i] * mkt[k] * y[k][j] * mkt[k])
                    .sum::<f64>()
                    / nf
                    - var_m * s[i][j]
            };
            let mut a = 0.0;
            let mut b = 0.0;
            let mut c = 0.0;
            for i in 0..p {
                for j in 0..p {
                    a += k1(i, j) * cov_m[j] / var_m;
                    b += k2(i, j) * cov_m[i] * cov_m[j] / (var_m * var_m);
                }
                c += k1(i, i) * cov_m[i] * cov_m[i] / (var_m * var_m);
            }
            rho = rho_diag + 2.0 * a - b - c;
        }
    }
    let mut gamma = 0.0;
    for i in 0..p {
        for j in 0..p {
            gamma += (s[i][j] - t[i][j]).powi(2);
        }
    }
    let lambda = if gamma > 0.0 {
        ((pi - rho) / (nf * gamma)).max(0.0).min(1.0)
    } else {
        0.0
    };
    let mut out = zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            out[i][j] = lambda * t[i][j] + (1.0 - lambda) * s[i][j];
        }
    }
    (out, lambda)
}

fn bandwidth(c: f64, p: usize) -> f64 {
    let c2 = c * c;
    let m = if c2 < 1.0 / c2 { c2 } else { 1.0 / c2 };
    m.powf(0.35) / (p as f64).powf(0.35)
}

fn theta_and_pi(x: &[f64], i: usize, p: usize, h: f64) -> (f64, f64) {
    let mut th = 0.0;
    let mut pt = 0.0;
    for &xj in x {
        let d = xj - x[i];
        let den = d * d + h * h * xj * xj;
        th += xj * d / den;
        pt += h * xj * xj / den;
    }
    (th / p as f64, pt / p as f64)
}

/// LIS inverse eigenvalues (floored) for ascending eigenvalues `l`.
pub fn lis_delta(l: &[f64], n: usize) -> Vec<f64> {
    let p = l.len();
    let c = p as f64 / (n - 1) as f64;
    let h = bandwidth(c, p);
    let x: Vec<f64> = l.iter().map(|v| 1.0 / v).collect();
    let xmin = x.iter().cloned().fold(f64::INFINITY, f64::min);
    (0..p)
        .map(|i| {
            let (th, _) = theta_and_pi(&x, i, p, h);
            let raw = (1.0 - c) * x[i] + 2.0 * c * x[i] * th;
            raw.min(x[i]).max((1.0 - c) * xmin)
        })
        .collect()
}

pub fn qis_values(l: &[f64], n: usize) -> Vec<f64> {
    let p = l.len();
    let neff = n - 1;
    let c = p as f64 / neff as f64;
    let h = bandwidth(c, p);
    let null = if p > neff { p - neff } else { 0 };
    let x: Vec<f64> = l[null..].iter().map(|v| 1.0 / v).collect();
    let mut d = Vec::new();
    if null == 0 {
        for i in 0..x.len() {
            let (th, pt) = theta_and_pi(&x, i, p, h);
            let a2 = th * th + pt * pt;
            d.push(
                1.0 / ((1.0 - c).powi(2) * x[i]
                    + 2.0 * c * (1.0 - c) * x[i] * th
                    + c * c * x[i] * a2),
            );
        }
    } else {
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        for _ in 0..null {
            d.push(1.0 / ((c - 1.0) * mx));
        }
        for i in 0..x.len() {
            let (th, pt) = theta_and_pi(&x, i, p, h);
            d.push(1.0 / (x[i] * (th * th + pt * pt)));
        }
    }
    let tr: f64 = l.iter().sum();
    let sd: f64 = d.iter().sum();
    d.iter().map(|v| v * tr / sd).collect()
}

pub struct AsOracle {
    pub values: Vec<f64>,
    pub density: Vec<f64>,
    pub hilbert: Vec<f64>,
}

/// 64-point Gauss-Legendre rule, nodes found by Newton iteration on P_64.
pub fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const N: usize = 64;
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut total = 0.0;
    for i in 1..=N {
        let mut x = (PI * (i as f64 - 0.25) / (N as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=N {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        total += w * f(mid + half * x);
    }
    total * half
}

pub fn as_values(l: &[f64], n: usize) -> AsOracle {
    let p = l.len();
    let c = p as f64 / (n - 1) as f64;
    let h = ((n - 1) as f64).cbrt().recip();
    let r5 = 5f64.sqrt();
    let mut density = vec![0.0; p];
    let mut hilbert = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            let hj = h * l[j];
            let k = (l[i] - l[j]) / hj;
            let e = 1.0 - k * k / 5.0;
            if e > 0.0 {
                density[i] += 3.0 / (4.0 * r5 * hj) * e;
            }
            let kernel_hilbert = if k.abs() >= 2.0 * r5 {
                // the closed form cancels badly out here; integrate directly
                gauss_legendre(
                    &|s| 3.0 / (4.0 * r5) * (1.0 - s * s / 5.0) / (s - k),
                    -r5,
                    r5,
                )
            } else {
                let log_part = if e == 0.0 {
                    0.0
                } else {
                    3.0 / (4.0 * r5) * e * ((r5 - k) / (r5 + k)).abs().ln()
                };
                -3.0 / 10.0 * k + log_part
            };
            hilbert[i] += kernel_hilbert / (hj * PI);
        }
        density[i] /= p as f64;
        hilbert[i] /= p as f64;
    }
    let values = (0..p)
        .map(|i| {
            let a = PI * c * l[i] * density[i];
            let b = 1.0 - c - PI * c * l[i] * hilbert[i];
            l[i] / (a * a + b * b)
        })
        .collect();
    AsOracle {
        values,
        density,
        hilbert,
    }
}

pub enum Spectral {
    Lis,
    Qis,
    Gis,
    As,
}

pub fn spectral(m: &Moments, kind: Spectral) -> Mat {
    let (l, u) = jacobi_eigen(&m.s);
    let d: Vec<f64> = match kind {
        Spectral::Lis => lis_delta(&l, m.n).iter().map(|v| 1.0 / v).collect(),
        Spectral::Qis => qis_values(&l, m.n),
        Spectral::Gis => {
            let lis = lis_delta(&l, m.n);
            qis_values(&l, m.n)
                .iter()
                .zip(&lis)
                .map(|(q, x)| (q / x).sqrt())
                .collect()
        }
        Spectral::As => as_values(&l, m.n).values,
    };
    recompose(&u, &d)
}
