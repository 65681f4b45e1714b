//! Deterministic quadrature on the cap `S^{n-1}_θ`, the full sphere and the
//! positive orthant, plus seeded importance-sampled Monte Carlo on the orthant.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cap::ContactAngle;
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss–Legendre mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Cap { theta: f64, n: usize },
    Sphere { n: usize },
    Orthant { n: usize, radius: f64 },
}

/// How the nodes were laid out; the spectral operators on the cap need it.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    /// Planar arc `x = (cos φ, sin φ)`, nodes in order of increasing `φ`.
    Arc { phi: Vec<f64>, lo: f64, hi: f64 },
    /// Tensor grid in polar angle `α` (from `E_3`) and azimuth `β`;
    /// node `i·azimuths + j` sits at `(alpha[i], β_j)` with
    /// `β_j = (j + ½)·2π/azimuths`.
    CapTensor {
        alpha: Vec<f64>,
        alpha_max: f64,
        azimuths: usize,
    },
    Scattered,
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub domain: Domain,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Exactness degree in the arc/polar parameter for Gauss rules, or
    /// algebraic convergence order for midpoint-type rules.
    pub declared_order: u32,
    pub layout: Layout,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        match self.domain {
            Domain::Cap { n, .. } | Domain::Sphere { n } | Domain::Orthant { n, .. } => n,
        }
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ wᵢ f(nodeᵢ)`; the first non-finite value aborts with its node.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (i, (x, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    index: i,
                    node: x.clone(),
                    value: v,
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Weighted sum of precomputed nodal values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Measure of `S^{n-1}_θ`.
pub fn cap_measure(n: usize, angle: &ContactAngle) -> Result<f64> {
    match n {
        2 => Ok(2.0 * angle.theta()),
        3 => Ok(2.0 * PI * (1.0 - angle.cos())),
        _ => Err(Error::UnsupportedDimension(n, "n in {2, 3}")),
    }
}

pub const MIN_RESOLUTION: usize = 4;

/// Gauss rule on `S^{n-1}_θ`.
///
/// `n = 2`: `resolution` Gauss–Legendre nodes in `φ ∈ [π/2 − θ, π/2 + θ]`.
/// `n = 3`: `resolution` Gauss–Legendre nodes in the polar angle `α ∈ [0, θ]`
/// (Jacobian `sin α`) times `2·resolution` midpoint nodes in azimuth.
/// Nodes never sit on the rim `x_n = cosθ`.
pub fn cap_rule(n: usize, angle: &ContactAngle, resolution: usize) -> Result<QuadratureRule> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Resolution {
            got: resolution,
            min: MIN_RESOLUTION,
        });
    }
    let theta = angle.theta();
    match n {
        2 => {
            let (lo, hi) = (FRAC_PI_2 - theta, FRAC_PI_2 + theta);
            let (phi, weights) = gauss_legendre_on(resolution, lo, hi);
            let nodes = phi.iter().map(|p| vec![p.cos(), p.sin()]).collect();
            Ok(QuadratureRule {
                domain: Domain::Cap { theta, n },
                nodes,
                weights,
                declared_order: 2 * resolution as u32 - 1,
                layout: Layout::Arc { phi, lo, hi },
            })
        }
        3 => {
            let azimuths = 2 * resolution;
            let (alpha, wa) = gauss_legendre_on(resolution, 0.0, theta);
            let dbeta = 2.0 * PI / azimuths as f64;
            let mut nodes = Vec::with_capacity(resolution * azimuths);
            let mut weights = Vec::with_capacity(resolution * azimuths);
            for (a, w) in alpha.iter().zip(&wa) {
                let (sa, ca) = a.sin_cos();
                for j in 0..azimuths {
                    let b = (j as f64 + 0.5) * dbeta;
                    let (sb, cb) = b.sin_cos();
                    nodes.push(vec![sa * cb, sa * sb, ca]);
                    weights.push(w * sa * dbeta);
                }
            }
            Ok(QuadratureRule {
                domain: Domain::Cap { theta, n },
                nodes,
                weights,
                declared_order: 2 * resolution as u32 - 1,
                layout: Layout::CapTensor {
                    alpha,
                    alpha_max: theta,
                    azimuths,
                },
            })
        }
        _ => Err(Error::UnsupportedDimension(n, "n in {2, 3}")),
    }
}

/// Planar cap rule built from Gauss panels that shrink geometrically toward
/// both rim points, for integrands with boundary layers at the rim.
pub fn cap_rule_graded(
    angle: &ContactAngle,
    per_panel: usize,
    levels: usize,
) -> Result<QuadratureRule> {
    cap_rule_graded_split(angle, per_panel, levels, &[])
}

/// As [`cap_rule_graded`], with additional panel breaks at the given arc
/// angles (used to put kinks of the integrand on panel boundaries).
pub fn cap_rule_graded_split(
    angle: &ContactAngle,
    per_panel: usize,
    levels: usize,
    breaks: &[f64],
) -> Result<QuadratureRule> {
    if per_panel < MIN_RESOLUTION {
        return Err(Error::Resolution {
            got: per_panel,
            min: MIN_RESOLUTION,
        });
    }
    let theta = angle.theta();
    let (lo, hi) = (FRAC_PI_2 - theta, FRAC_PI_2 + theta);
    let half = theta;
    let mut cuts = vec![lo, FRAC_PI_2, hi];
    for k in 1..=levels {
        let d = half * 0.5f64.powi(k as i32);
        cuts.push(lo + d);
        cuts.push(hi - d);
    }
    cuts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut phi = Vec::new();
    let mut weights = Vec::new();
    for w in cuts.windows(2) {
        let (p, q) = gauss_legendre_on(per_panel, w[0], w[1]);
        phi.extend(p);
        weights.extend(q);
    }
    let nodes = phi.iter().map(|p| vec![p.cos(), p.sin()]).collect();
    Ok(QuadratureRule {
        domain: Domain::Cap { theta, n: 2 },
        nodes,
        weights,
        declared_order: 2 * per_panel as u32 - 1,
        layout: Layout::Arc { phi, lo, hi },
    })
}

/// Directions and weights covering the closed positive orthant of the sphere;
/// mirrored copies of these give [`sphere_rule`].
#[derive(Clone, Debug, PartialEq)]
pub struct OrthantMesh {
    pub n: usize,
    pub resolution: usize,
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// `n = 2`: `resolution` midpoints in `φ ∈ (0, π/2)`.
/// `n = 3`: `resolution` Gauss nodes in `α ∈ (0, π/2)` times `resolution`
/// midpoints in `β ∈ (0, π/2)`.
pub fn orthant_mesh(n: usize, resolution: usize) -> Result<OrthantMesh> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Resolution {
            got: resolution,
            min: MIN_RESOLUTION,
        });
    }
    let step = FRAC_PI_2 / resolution as f64;
    let mids = (0..resolution).map(move |k| (k as f64 + 0.5) * step);
    let (dirs, weights) = match n {
        2 => mids.map(|p| (vec![p.cos(), p.sin()], step)).unzip(),
        3 => {
            let (alpha, wa) = gauss_legendre_on(resolution, 0.0, FRAC_PI_2);
            let mut dirs = Vec::new();
            let mut weights = Vec::new();
            for (a, w) in alpha.iter().zip(&wa) {
                let (sa, ca) = a.sin_cos();
                for b in mids.clone() {
                    let (sb, cb) = b.sin_cos();
                    dirs.push(vec![sa * cb, sa * sb, ca]);
                    weights.push(w * sa * step);
                }
            }
            (dirs, weights)
        }
        _ => return Err(Error::UnsupportedDimension(n, "n in {2, 3}")),
    };
    Ok(OrthantMesh {
        n,
        resolution,
        dirs,
        weights,
    })
}

/// All `2^n` sign patterns of `v`.
pub fn mirror(v: &[f64]) -> impl Iterator<Item = Vec<f64>> + '_ {
    let n = v.len();
    (0..1u32 << n).map(move |mask| {
        v.iter()
            .enumerate()
            .map(|(i, x)| if mask >> i & 1 == 1 { -x } else { *x })
            .collect()
    })
}

/// Full-sphere rule: the orthant mesh reflected into all `2^n` orthants.
pub fn sphere_rule(n: usize, resolution: usize) -> Result<QuadratureRule> {
    let mesh = orthant_mesh(n, resolution)?;
    let mut nodes = Vec::with_capacity(mesh.dirs.len() << n);
    let mut weights = Vec::with_capacity(mesh.dirs.len() << n);
    for (d, w) in mesh.dirs.iter().zip(&mesh.weights) {
        for m in mirror(d) {
            nodes.push(m);
            weights.push(*w);
        }
    }
    Ok(QuadratureRule {
        domain: Domain::Sphere { n },
        nodes,
        weights,
        declared_order: 2,
        layout: Layout::Scattered,
    })
}

/// Tensor Gauss rule on `[0, radius]^n` (`n = 2` cross-checks of Monte Carlo).
pub fn orthant_rule(n: usize, radius: f64, resolution: usize) -> Result<QuadratureRule> {
    if n != 2 {
        return Err(Error::UnsupportedDimension(n, "n = 2"));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::Resolution {
            got: resolution,
            min: MIN_RESOLUTION,
        });
    }
    let (x, w) = gauss_legendre_on(resolution, 0.0, radius);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (a, wa) in x.iter().zip(&w) {
        for (b, wb) in x.iter().zip(&w) {
            nodes.push(vec![*a, *b]);
            weights.push(wa * wb);
        }
    }
    Ok(QuadratureRule {
        domain: Domain::Orthant { n, radius },
        nodes,
        weights,
        declared_order: 2 * resolution as u32 - 1,
        layout: Layout::Scattered,
    })
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Settings for [`orthant_mc`]. The proposal is a product of half-normals
/// with standard deviation `scale`; choose it at least as wide as the
/// integrand (for `e^{-½g²}` with `g ≥ m|x|`, `scale = 1/m`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Separates independent estimates drawn from one seed.
    pub stream: u64,
    pub scale: f64,
}

pub const MC_MIN_SAMPLES: usize = 10_000;
const MC_CHUNK: usize = 1 << 15;

/// Importance-sampled integral over `(0, ∞)^n`.
///
/// Samples are drawn in fixed-size chunks, each from its own ChaCha stream
/// indexed by `(stream, chunk)`, and chunk sums are reduced in chunk order,
/// so the result does not depend on thread count.
pub fn orthant_mc<F>(n: usize, integrand: F, cfg: McConfig) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if cfg.samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least {MC_MIN_SAMPLES} samples, got {}",
            cfg.samples
        )));
    }
    if !(cfg.scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "proposal scale must be positive, got {}",
            cfg.scale
        )));
    }
    let chunks = cfg.samples.div_ceil(MC_CHUNK);
    let log_norm = n as f64 * ((2.0 / PI).sqrt() / cfg.scale).ln();
    let inv2s2 = 0.5 / (cfg.scale * cfg.scale);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((cfg.stream << 32) | c as u64);
            let count = MC_CHUNK.min(cfg.samples - c * MC_CHUNK);
            let mut x = vec![0.0; n];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let mut r2 = 0.0;
                for xi in x.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi = cfg.scale * z.abs();
                    r2 += *xi * *xi;
                }
                let q = (log_norm - r2 * inv2s2).exp();
                let w = integrand(&x) / q;
                s1 += w;
                s2 += w * w;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let m = cfg.samples as f64;
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / m).sqrt(),
        samples: cfg.samples,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_3;

    use approx::assert_abs_diff_eq;

    use super::*;

    fn pi3() -> ContactAngle {
        ContactAngle::new(FRAC_PI_3).unwrap()
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1, 2, 5, 16, 64, 128] {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            // exact for degree 2n − 1
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert_abs_diff_eq!(q, exact, epsilon = 1e-12);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn cap_rule_measures() {
        let a = pi3();
        let r2 = cap_rule(2, &a, 16).unwrap();
        assert_abs_diff_eq!(r2.measure(), 2.0 * FRAC_PI_3, epsilon = 1e-12);
        let r3 = cap_rule(3, &a, 16).unwrap();
        assert_abs_diff_eq!(r3.measure(), PI, epsilon = 1e-10);
        assert_abs_diff_eq!(r3.measure(), cap_measure(3, &a).unwrap(), epsilon = 1e-10);
        assert!(cap_rule(4, &a, 16).is_err());
        assert!(cap_rule(2, &a, 3).is_err());
    }

    #[test]
    fn cap_nodes_stay_off_the_rim() {
        for theta in [0.3, FRAC_PI_3, 1.2, 1.5] {
            let a = ContactAngle::new(theta).unwrap();
            for n in [2, 3] {
                let r = cap_rule(n, &a, 24).unwrap();
                for x in &r.nodes {
                    assert!(x[n - 1] > a.cos() + 1e-6);
                    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn odd_integrand_vanishes() {
        let a = pi3();
        for n in [2, 3] {
            let r = cap_rule(n, &a, 20).unwrap();
            let v = r.integrate(|x| x[0] * (1.0 + x[n - 1])).unwrap();
            assert!(v.abs() < 1e-12, "{v}");
            if n == 3 {
                let v = r.integrate(|x| x[1].powi(3) + x[0] * x[1]).unwrap();
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ell_on_arc_against_monte_carlo() {
        let a = pi3();
        let r = cap_rule(2, &a, 32).unwrap();
        let q = r.integrate(|x| a.ell_at(x)).unwrap();
        // uniform sampling of φ on the arc
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 1_000_000;
        let (lo, len) = (FRAC_PI_2 - FRAC_PI_3, 2.0 * FRAC_PI_3);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            let phi = lo + len * rng.random::<f64>();
            let v = len * (1.0 - a.cos() * phi.sin());
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / m as f64;
        let se = ((s2 / m as f64 - mean * mean) / m as f64).sqrt();
        assert!((q - mean).abs() < 3.0 * se, "{q} vs {mean} ± {se}");
        // closed form 2θ − 2 cosθ sinθ
        assert_abs_diff_eq!(q, 2.0 * FRAC_PI_3 - 2.0 * a.cos() * a.sin(), epsilon = 1e-13);
    }

    #[test]
    fn non_finite_is_reported() {
        let r = cap_rule(2, &pi3(), 8).unwrap();
        let err = r
            .integrate(|x| if x[0] > 0.5 { f64::NAN } else { 1.0 })
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
    }

    #[test]
    fn sphere_rule_measure_and_symmetry() {
        let s2 = sphere_rule(2, 16).unwrap();
        assert_abs_diff_eq!(s2.measure(), 2.0 * PI, epsilon = 1e-12);
        let s3 = sphere_rule(3, 16).unwrap();
        assert_abs_diff_eq!(s3.measure(), 4.0 * PI, epsilon = 1e-12);
        let m = s3.integrate(|x| x[0] * x[0]).unwrap();
        assert_abs_diff_eq!(m, 4.0 * PI / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn graded_rule_matches_plain_rule() {
        let a = pi3();
        let g = cap_rule_graded(&a, 8, 20).unwrap();
        assert_abs_diff_eq!(g.measure(), 2.0 * FRAC_PI_3, epsilon = 1e-13);
        let plain = cap_rule(2, &a, 40).unwrap();
        let f = |x: &[f64]| (1.0 - a.cos() * x[1]).powi(3) / (1.0 + x[0] * x[0]);
        assert_abs_diff_eq!(
            g.integrate(f).unwrap(),
            plain.integrate(f).unwrap(),
            epsilon = 1e-13
        );
        if let Layout::Arc { phi, .. } = &g.layout {
            assert!(phi.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn gaussian_orthant_mass() {
        let cfg = McConfig {
            samples: 200_000,
            seed: 5,
            stream: 0,
            scale: 1.3,
        };
        let est = orthant_mc(2, |x| (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp(), cfg).unwrap();
        assert!((est.estimate - FRAC_PI_2).abs() < 3.0 * est.std_error);
        let again = orthant_mc(2, |x| (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp(), cfg).unwrap();
        assert_eq!(est.estimate.to_bits(), again.estimate.to_bits());
        assert_eq!(est.std_error.to_bits(), again.std_error.to_bits());

        let tensor = orthant_rule(2, 12.0, 64).unwrap();
        let t = tensor
            .integrate(|x| (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp())
            .unwrap();
        assert_abs_diff_eq!(t, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn mc_is_thread_count_independent() {
        let cfg = McConfig {
            samples: 100_000,
            seed: 9,
            stream: 3,
            scale: 1.0,
        };
        let f = |x: &[f64]| (-(x[0] + x[1] + x[2])).exp();
        let a = orthant_mc(3, f, cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| orthant_mc(3, f, cfg).unwrap());
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    }

    #[test]
    fn mc_rejects_small_samples() {
        let cfg = McConfig {
            samples: 10,
            seed: 0,
            stream: 0,
            scale: 1.0,
        };
        assert!(orthant_mc(2, |_| 1.0, cfg).is_err());
    }
}
