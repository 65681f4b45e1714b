//! Central finite-difference oracles.
//!
//! These never share code with the closed forms they are compared against.

use nalgebra::DMatrix;

use crate::cap::norm;

/// Gradient step `1e-5 · max(1, |x|)`.
pub fn gradient_step(x: &[f64]) -> f64 {
    1e-5 * norm(x).max(1.0)
}

/// Hessian step `1e-4 · max(1, |x|)`.
pub fn hessian_step(x: &[f64]) -> f64 {
    1e-4 * norm(x).max(1.0)
}

pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    (0..x.len())
        .map(|i| {
            z[i] = x[i] + h;
            let fp = f(&z);
            z[i] = x[i] - h;
            let fm = f(&z);
            z[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Three-point diagonal, four-point mixed entries.
pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut z = x.to_vec();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        z[i] = x[i] + h;
        let fp = f(&z);
        z[i] = x[i] - h;
        let fm = f(&z);
        z[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = mixed(&f, &mut z, x, i, j, h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Four-point stencil on every entry, diagonal included (effective step `2h`
/// on the diagonal). For a function of linear combinations of the
/// coordinates this keeps the null space of the true Hessian exact.
pub fn hessian_uniform<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut z = x.to_vec();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = mixed(&f, &mut z, x, i, j, h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn mixed<F: Fn(&[f64]) -> f64>(
    f: &F,
    z: &mut [f64],
    x: &[f64],
    i: usize,
    j: usize,
    h: f64,
) -> f64 {
    let mut eval = |si: f64, sj: f64| {
        z[i] += si * h;
        z[j] += sj * h;
        let v = f(z);
        z[i] = x[i];
        z[j] = x[j];
        v
    };
    (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
}
