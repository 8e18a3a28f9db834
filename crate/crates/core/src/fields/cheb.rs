//! Chebyshev–Gauss–Lobatto collocation on [0, 1] and Gauss–Legendre rules.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Chebyshev–Gauss–Lobatto nodes on [0, 1], ascending, `nodes[0] = 0`.
pub fn cgl_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two Lobatto nodes");
    let m = (n - 1) as f64;
    (0..n)
        .map(|j| {
            if j == 0 {
                0.0
            } else if j == n - 1 {
                1.0
            } else {
                // sin^2 form avoids cancellation near zeta = 0
                let s = (PI * j as f64 / (2.0 * m)).sin();
                s * s
            }
        })
        .collect()
}

/// Barycentric weights for the Lobatto nodes.
pub fn cgl_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect()
}

/// Differentiation matrix for arbitrary distinct nodes with barycentric
/// weights. Diagonal set by the negative-sum rule.
pub fn diff_matrix(nodes: &[f64], weights: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (weights[j] / weights[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Clenshaw–Curtis quadrature weights on [0, 1] for the Lobatto nodes.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let big_n = n - 1;
    let nf = big_n as f64;
    let mut w = vec![0.0; n];
    if big_n == 1 {
        return vec![0.5, 0.5];
    }
    let theta: Vec<f64> = (0..n).map(|j| PI * j as f64 / nf).collect();
    let mut v = vec![1.0; big_n - 1];
    if big_n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[big_n] = w[0];
        for k in 1..big_n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta[i + 1]).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[big_n] = w[0];
        for k in 1..=(big_n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for i in 1..big_n {
        w[i] = 2.0 * v[i - 1] / nf;
    }
    // map [-1, 1] -> [0, 1]
    w.iter().map(|x| 0.5 * x).collect()
}

/// Barycentric interpolation through `(nodes, values)`.
pub fn bary_eval(nodes: &[f64], weights: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xj, &wj), &fj) in nodes.iter().zip(weights).zip(values) {
        let diff = x - xj;
        if diff == 0.0 {
            return fj;
        }
        let t = wj / diff;
        num += t * fj;
        den += t;
    }
    num / den
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p0) / (z * z - 1.0))
}

/// Composite Gauss–Legendre rule on `[a, b]` with panels no wider than
/// `max_width`, `order` nodes per panel.
pub fn composite_gauss(a: f64, b: f64, order: usize, max_width: f64) -> (Vec<f64>, Vec<f64>) {
    let (xr, wr) = gauss_legendre(order);
    let panels = (((b - a) / max_width).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (xi, wi) in xr.iter().zip(&wr) {
            xs.push(lo + 0.5 * h * (xi + 1.0));
            ws.push(0.5 * h * wi);
        }
    }
    (xs, ws)
}
