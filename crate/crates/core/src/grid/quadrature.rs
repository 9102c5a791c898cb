//! Gauss-Jacobi and Gauss-Radau-Jacobi rules on [-1, 1].

use nalgebra::{DMatrix, SymmetricEigen};

fn ln_factorial(m: u32) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

/// Value and derivative of the Jacobi polynomial `P_k^{(a,b)}` at `t`.
pub fn jacobi(k: usize, a: u32, b: u32, t: f64) -> (f64, f64) {
    let p = jacobi_value(k, a as f64, b as f64, t);
    if k == 0 {
        return (p, 0.0);
    }
    let scale = 0.5 * (k as f64 + a as f64 + b as f64 + 1.0);
    let dp = scale * jacobi_value(k - 1, a as f64 + 1.0, b as f64 + 1.0, t);
    (p, dp)
}

fn jacobi_value(k: usize, a: f64, b: f64, t: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = 0.5 * ((a + b + 2.0) * t + a - b);
    for m in 2..=k {
        let m = m as f64;
        let s = 2.0 * m + a + b;
        let c1 = 2.0 * m * (m + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * t + a * a - b * b);
        let c3 = 2.0 * (m + a - 1.0) * (m + b - 1.0) * s;
        let p2 = (c2 * p1 - c3 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Nodes (ascending) and weights of the `n`-point Gauss rule for the weight
/// `(1-t)^a (1+t)^b`.
///
/// Golub-Welsch supplies starting nodes, which are polished by Newton steps on
/// the Jacobi polynomial. Weights come from the derivative formula, which keeps
/// full relative accuracy for the tiny weights next to the endpoints.
pub fn gauss_jacobi(n: usize, a: u32, b: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let (af, bf) = (a as f64, b as f64);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + af + bf;
        jac[(k, k)] = if k == 0 {
            (bf - af) / (af + bf + 2.0)
        } else {
            (bf * bf - af * af) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + af + bf;
            let beta = 4.0 * m * (m + af) * (m + bf) * (m + af + bf)
                / (s * s * (s + 1.0) * (s - 1.0));
            jac[(k, k + 1)] = beta.sqrt();
            jac[(k + 1, k)] = beta.sqrt();
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.total_cmp(y));

    let ln_c = ln_factorial(n as u32 + a) + ln_factorial(n as u32 + b)
        - ln_factorial(n as u32 + a + b)
        - ln_factorial(n as u32)
        + (af + bf + 1.0) * std::f64::consts::LN_2;
    let mut weights = Vec::with_capacity(n);
    for t in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = jacobi(n, a, b, *t);
            let step = p / dp;
            *t -= step;
            if step.abs() < 1e-17 {
                break;
            }
        }
        let (_, dp) = jacobi(n, a, b, *t);
        let ln_w = ln_c - (1.0 - *t * *t).ln() - 2.0 * dp.abs().ln();
        weights.push(ln_w.exp());
    }
    (nodes, weights)
}

/// Gauss-Radau rule for `(1+t)^b dt` with the fixed node `t = 1` placed last.
/// Exact for polynomials of degree `2n`, where `n` is the number of free nodes.
pub fn gauss_radau_right(n: usize, b: u32) -> (Vec<f64>, Vec<f64>) {
    let (mut t, lam) = gauss_jacobi(n, 1, b);
    let mut w: Vec<f64> = t.iter().zip(&lam).map(|(t, l)| l / (1.0 - t)).collect();
    let total = 2f64.powi(b as i32 + 1) / (b as f64 + 1.0);
    let end = total - w.iter().sum::<f64>();
    t.push(1.0);
    w.push(end);
    (t, w)
}

/// Barycentric weights of the nodes, rescaled to unit max modulus.
pub fn barycentric_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut ln = vec![0.0; n];
    let mut sign = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                let d = t[j] - t[k];
                ln[j] -= d.abs().ln();
                if d < 0.0 {
                    sign[j] = -sign[j];
                }
            }
        }
    }
    let top = ln.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ln.iter().zip(&sign).map(|(l, s)| s * (l - top).exp()).collect()
}

/// Differentiation matrix of the Lagrange interpolant on `t`.
pub fn differentiation_matrix(t: &[f64], v: &[f64]) -> DMatrix<f64> {
    let n = t.len();
    let mut d = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j != k {
                let e = (v[j] / v[k]) / (t[k] - t[j]);
                d[(k, j)] = e;
                diag -= e;
            }
        }
        d[(k, k)] = diag;
    }
    d
}

/// Barycentric evaluation of the interpolant through `(t, f)` at `x`.
pub fn barycentric_eval(t: &[f64], v: &[f64], f: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..t.len() {
        let d = x - t[j];
        if d == 0.0 {
            return f[j];
        }
        let c = v[j] / d;
        num += c * f[j];
        den += c;
    }
    num / den
}
