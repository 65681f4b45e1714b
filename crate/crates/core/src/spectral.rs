//! Spectral differentiation: barycentric polynomial interpolation on Gauss
//! nodes and trigonometric differentiation of periodic samples.

use rustfft::{num_complex::Complex, FftPlanner};

/// Polynomial interpolant through distinct nodes in barycentric form.
#[derive(Clone, Debug)]
pub struct Barycentric {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Barycentric {
    pub fn new(nodes: &[f64]) -> Self {
        let n = nodes.len();
        // rescale to unit length so the products stay in range
        let span = nodes[n - 1] - nodes[0];
        let scale = if span > 0.0 { 4.0 / span } else { 1.0 };
        let mut weights = vec![1.0; n];
        for j in 0..n {
            for k in 0..n {
                if k != j {
                    weights[j] /= scale * (nodes[j] - nodes[k]);
                }
            }
        }
        let top = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        weights.iter_mut().for_each(|w| *w /= top);
        Self {
            nodes: nodes.to_vec(),
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First-derivative matrix at the nodes, row-major.
    pub fn diff_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = self.weights[j] / self.weights[i] / (self.nodes[i] - self.nodes[j]);
                    d[i * n + j] = v;
                    diag -= v;
                }
            }
            d[i * n + i] = diag;
        }
        d
    }

    /// Value and first derivative of the interpolant at `x`, which must not
    /// be a node.
    pub fn eval_with_derivative(&self, values: &[f64], x: f64) -> (f64, f64) {
        let (mut num, mut den, mut dnum, mut dden) = (0.0, 0.0, 0.0, 0.0);
        for ((xj, wj), fj) in self.nodes.iter().zip(&self.weights).zip(values) {
            let r = 1.0 / (x - xj);
            let b = wj * r;
            num += b * fj;
            den += b;
            dnum -= b * r * fj;
            dden -= b * r;
        }
        let p = num / den;
        (p, (dnum - p * dden) / den)
    }
}

/// `y = M x` for a square row-major matrix.
pub fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| m[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Second derivative of uniformly spaced samples of a `2π`-periodic function.
/// The Nyquist mode is dropped for even lengths.
pub fn periodic_second_derivative(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut planner = FftPlanner::new();
    // the mean has zero second derivative; removing it keeps the roundoff
    // proportional to the oscillating part
    let mean = values.iter().sum::<f64>() / m as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        if m.is_multiple_of(2) && k == m / 2 {
            *c = Complex::new(0.0, 0.0);
        } else {
            *c *= -freq * freq;
        }
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf.iter().map(|c| c.re / m as f64).collect()
}
