//! Reference implementations used as test oracles. Deliberately independent
//! of the library's spectral kernels: plain cyclic Jacobi rotations, an exact
//! breakpoint search for the Fantope threshold, and a smoothed first-order
//! solver with a duality-gap certificate.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues are
/// returned in descending order with matching columns.
pub fn jacobi_eig(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

pub fn rebuild(values: &DVector<f64>, vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(vectors.nrows(), vectors.nrows());
    for (i, &l) in values.iter().enumerate() {
        let c = vectors.column(i);
        out += f(l) * c * c.transpose();
    }
    out
}

/// Largest singular value via the Jacobi eigenvalues of `AᵀA`.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    let (vals, _) = jacobi_eig(&(a.transpose() * a));
    vals[0].max(0.0).sqrt()
}

/// `ψ(x) = sign(x) log(1 + |x| + x²/2)` written out independently.
pub fn psi_scalar(x: f64) -> f64 {
    let a = x.abs();
    x.signum() * (1.0 + a + a * a / 2.0).ln()
}

/// Upper-right block of `ψ` applied to the dilation of `a`.
pub fn psi_matrix_oracle(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (d1, d2) = a.shape();
    let mut dil = DMatrix::zeros(d1 + d2, d1 + d2);
    for i in 0..d1 {
        for j in 0..d2 {
            dil[(i, d1 + j)] = a[(i, j)];
            dil[(d1 + j, i)] = a[(i, j)];
        }
    }
    let (vals, vecs) = jacobi_eig(&dil);
    let b = rebuild(&vals, &vecs, psi_scalar);
    DMatrix::from_fn(d1, d2, |i, j| b[(i, d1 + j)])
}

/// Exact `θ` with `Σ clamp(λ_i − θ, 0, 1) = k`, found by scanning the
/// breakpoints of the piecewise-linear left side.
fn fantope_theta(vals: &DVector<f64>, k: usize) -> f64 {
    let g = |t: f64| vals.iter().map(|&l| (l - t).clamp(0.0, 1.0)).sum::<f64>();
    let mut pts: Vec<f64> = vals.iter().flat_map(|&l| [l, l - 1.0]).collect();
    pts.sort_by(f64::total_cmp);
    let kf = k as f64;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ga, gb) = (g(a), g(b));
        if ga >= kf && gb <= kf {
            if ga == gb {
                return a;
            }
            return a + (ga - kf) * (b - a) / (ga - gb);
        }
    }
    pts[0]
}

pub fn fantope_project_oracle(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = a.nrows();
    if k == d {
        return DMatrix::identity(d, d);
    }
    let (vals, vecs) = jacobi_eig(a);
    let theta = fantope_theta(&vals, k);
    rebuild(&vals, &vecs, |l| (l - theta).clamp(0.0, 1.0))
}

pub fn fantope_objective(w: &DMatrix<f64>, sigma: &DMatrix<f64>, lambda: f64) -> f64 {
    w.dot(sigma) - lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Sum of the `k` largest eigenvalues: the support function of the Fantope.
pub fn ky_fan(a: &DMatrix<f64>, k: usize) -> f64 {
    jacobi_eig(a).0.iter().take(k).sum()
}

pub struct OracleResult {
    pub w: DMatrix<f64>,
    /// Primal value `F(w)`; a lower bound on the optimum.
    pub primal: f64,
    /// `Σ_top-k eig(Σ − Y)` for a box-feasible `Y`; an upper bound.
    pub dual: f64,
    pub steps: usize,
}

/// Solves `max ⟨W, Σ⟩ − λ‖W‖₁` over the rank-`k` Fantope by accelerated
/// projected gradient on the Huber-smoothed penalty, shrinking the smoothing
/// width `μ` stage by stage. The Huber gradient doubles as a dual point, so
/// every reported result carries a certified gap `dual − primal`.
pub fn fantope_oracle(sigma: &DMatrix<f64>, lambda: f64, k: usize, max_steps: usize, gap_tol: f64) -> OracleResult {
    let d = sigma.nrows();
    let mut w = fantope_project_oracle(sigma, k);
    let mut best = OracleResult {
        primal: fantope_objective(&w, sigma, lambda),
        dual: ky_fan(sigma, k) + lambda * d as f64 * d as f64,
        w: w.clone(),
        steps: 0,
    };
    let mut steps = 0;
    let mut mu = 1e-1;
    while steps < max_steps {
        let step = if lambda > 0.0 { mu / lambda } else { 1.0 };
        let grad = |x: &DMatrix<f64>| sigma - x.map(|v| lambda * (v / mu).clamp(-1.0, 1.0));
        let mut y = w.clone();
        let mut t = 1.0f64;
        let stage_len = 200 + (1.0 / mu).sqrt() as usize * 20;
        for _ in 0..stage_len {
            steps += 1;
            let next = fantope_project_oracle(&(&y + grad(&y) * step), k);
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = &next + (&next - &w) * ((t - 1.0) / t_next);
            w = next;
            t = t_next;
            if steps >= max_steps {
                break;
            }
        }
        let primal = fantope_objective(&w, sigma, lambda);
        let y_dual = w.map(|v| lambda * (v / mu).clamp(-1.0, 1.0));
        let dual = ky_fan(&(sigma - y_dual), k);
        if primal > best.primal {
            best.primal = primal;
            best.w = w.clone();
        }
        best.dual = best.dual.min(dual);
        best.steps = steps;
        if best.dual - best.primal <= gap_tol {
            break;
        }
        mu = (mu * 0.3).max(1e-10);
    }
    best
}
