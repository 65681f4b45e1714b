//! Oracle-backed checks of the cap potentials, the gradient map, the
//! 2-concavity inequality and the Gaussian integral inequality.
//!
//! Every check returns a [`CheckResult`] whose margin is signed so that
//! `passed ⇔ worst_margin ≥ −tolerance`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bodies::{BodyKind, BodySpec};
use crate::cap::{
    dot, hess_v_2d, norm, potential_v, range_profile, ContactAngle, DoubledCap, OrthantPoint,
};
use crate::error::{Error, Result};
use crate::fd;
use crate::functionals::vol_cap_hat;
use crate::quadrature::{gauss_legendre_on, orthant_mc, McConfig, McEstimate};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub n: usize,
    pub theta: f64,
    pub samples: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub oracle: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<CheckResult>,
}

impl CheckResult {
    #[allow(clippy::too_many_arguments)]
    pub fn leaf(
        name: impl Into<String>,
        n: usize,
        angle: &ContactAngle,
        samples: usize,
        seed: u64,
        worst_margin: f64,
        tolerance: f64,
        oracle: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            theta: angle.theta(),
            samples,
            worst_margin,
            tolerance,
            passed: worst_margin >= -tolerance,
            seed,
            oracle: oracle.into(),
            details: BTreeMap::new(),
            components: Vec::new(),
        }
    }

    /// Passes iff every component passes; the reported margin is that of the
    /// component with the least slack relative to its tolerance.
    pub fn group(
        name: impl Into<String>,
        n: usize,
        angle: &ContactAngle,
        seed: u64,
        components: Vec<CheckResult>,
    ) -> Self {
        let worst = components
            .iter()
            .min_by(|a, b| a.slack().total_cmp(&b.slack()))
            .expect("at least one component");
        Self {
            name: name.into(),
            n,
            theta: angle.theta(),
            samples: components.iter().map(|c| c.samples).sum(),
            worst_margin: worst.worst_margin,
            tolerance: worst.tolerance,
            passed: components.iter().all(|c| c.passed),
            seed,
            oracle: worst.oracle.clone(),
            details: BTreeMap::new(),
            components,
        }
    }

    /// `(margin + tolerance) / tolerance`, or the raw margin when the
    /// tolerance is zero. Negative iff the check fails.
    pub fn slack(&self) -> f64 {
        if self.tolerance > 0.0 {
            (self.worst_margin + self.tolerance) / self.tolerance
        } else {
            self.worst_margin
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn component(&self, name: &str) -> Option<&CheckResult> {
        self.components.iter().find(|c| c.name == name)
    }

    /// All leaves, depth first.
    pub fn leaves(&self) -> Vec<&CheckResult> {
        if self.components.is_empty() {
            vec![self]
        } else {
            self.components.iter().flat_map(|c| c.leaves()).collect()
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let l = norm(v);
    v.iter().map(|x| x / l).collect()
}

fn dims(n: usize) -> Result<()> {
    if matches!(n, 2 | 3) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n, "n in {2, 3}"))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn eig_range(m: DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m).eigenvalues;
    (e.min(), e.max())
}

pub const LEMMA1_TOL: f64 = 1e-7;
/// Step of the concavity oracle. With the four-point stencil on every entry
/// the exact null direction of the Hessian survives differencing, which the
/// standard stencil at `1e-4` does not resolve below `1e-7`.
pub const LEMMA1_STEP: f64 = 1e-3;

/// Extreme eigenvalues of the FD Hessian of `x ↦ V(√x)` over seeded unit
/// points drawn from `(0.05, 1)^n`.
pub fn sqrt_potential_eigs(n: usize, angle: &ContactAngle, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_for(seed, 1);
    let f = |x: &[f64]| {
        let r: Vec<f64> = x.iter().map(|v| v.sqrt()).collect();
        potential_v(&r, angle)
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let x = unit(&uniform_vec(&mut rng, n, 0.05, 1.0));
        let h = LEMMA1_STEP * norm(&x).max(1.0);
        let (a, b) = eig_range(fd::hessian_uniform(f, &x, h));
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo, hi)
}

/// Concavity of `V(√x)` on the orthant and the closed-form Hessian of its
/// two-variable reduction. Runs at any angle so that the failure in the
/// obtuse regime can be observed.
pub fn check_lemma1(n: usize, angle: &ContactAngle, samples: usize, seed: u64) -> Result<CheckResult> {
    dims(n)?;
    let (_, max_eig) = sqrt_potential_eigs(n, angle, samples, seed);
    let concavity = CheckResult::leaf(
        "concavity",
        n,
        angle,
        samples,
        seed,
        -max_eig,
        LEMMA1_TOL,
        "finite-difference Hessian (4-point stencil, step 1e-3), max eigenvalue",
    )
    .with_detail("max_eigenvalue", max_eig);

    // reduction: v(s, t) = V(√s, √t) differenced directly
    let v = |z: &[f64]| potential_v(&[z[0].sqrt(), z[1].sqrt()], angle);
    let mut rng = rng_for(seed, 2);
    let mut worst: f64 = 0.0;
    let reduced = samples.min(200);
    for _ in 0..reduced {
        let st = unit(&uniform_vec(&mut rng, 2, 0.1, 1.0));
        let exact = hess_v_2d(st[0], st[1], angle)?;
        // Richardson on the central stencil; the wide step keeps roundoff
        // on V (about 24 at θ = π/6) below the tolerance
        let h = 2e-3;
        let approx = (fd::hessian(v, &st, h / 2.0) * 4.0 - fd::hessian(v, &st, h)) / 3.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((exact[(i, j)] - approx[(i, j)]).abs());
            }
        }
    }
    let reduction = CheckResult::leaf(
        "reduction_hessian",
        n,
        angle,
        reduced,
        seed,
        -worst,
        1e-6,
        "Richardson-extrapolated finite-difference Hessian of V(sqrt s, sqrt t)",
    );
    Ok(CheckResult::group("lemma1", n, angle, seed, vec![concavity, reduction]))
}

/// Convexity of `V(√x)` for an obtuse angle.
pub fn check_lemma1_obtuse(n: usize, angle: &ContactAngle, samples: usize, seed: u64) -> Result<CheckResult> {
    dims(n)?;
    angle.require_obtuse()?;
    let (min_eig, _) = sqrt_potential_eigs(n, angle, samples, seed);
    Ok(CheckResult::leaf(
        "lemma1_obtuse_convexity",
        n,
        angle,
        samples,
        seed,
        min_eig,
        LEMMA1_TOL,
        "finite-difference Hessian (4-point stencil, step 1e-3), min eigenvalue",
    )
    .with_detail("min_eigenvalue", min_eig))
}

/// Seeded unit vector with `y_n/|y| − cosθ` of the requested sign and at
/// least `gap` away from zero, all coordinates positive.
fn sample_region(rng: &mut ChaCha8Rng, n: usize, angle: &ContactAngle, cap: bool, gap: f64) -> Vec<f64> {
    loop {
        let y = unit(&uniform_vec(rng, n, 0.02, 1.0));
        let d = y[n - 1] - angle.cos();
        if (cap && d > gap) || (!cap && d < -gap) {
            return y;
        }
    }
}

/// Gradient and Hessian determinant of `V*` on both branches, `C¹` matching
/// across the cone, and the Monge–Ampère mass of small boxes.
pub fn check_lemma2(n: usize, angle: &ContactAngle, samples: usize, seed: u64) -> Result<CheckResult> {
    dims(n)?;
    angle.require_acute()?;
    let c = DoubledCap::new(*angle)?;
    let vs = |y: &[f64]| c.v_star(y);
    let s2 = angle.sin().powi(2);

    let mut rng = rng_for(seed, 3);
    let mut cyl_err: f64 = 0.0;
    for _ in 0..samples {
        let y = sample_region(&mut rng, n, angle, false, 1e-3);
        let g = fd::gradient(vs, &y, fd::gradient_step(&y));
        let mut displayed: Vec<f64> = y[..n - 1].iter().map(|v| s2 * v).collect();
        displayed.push(0.0);
        cyl_err = cyl_err
            .max(max_abs_diff(&c.grad_v_star(&y), &g))
            .max(max_abs_diff(&displayed, &g));
    }
    let cylinder = CheckResult::leaf(
        "cylinder_gradient",
        n,
        angle,
        samples,
        seed,
        -cyl_err,
        1e-8,
        "central-difference gradient of V*, step 1e-5",
    );

    let mut rng = rng_for(seed, 4);
    let (mut cap_err, mut det_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let y = sample_region(&mut rng, n, angle, true, 1e-3);
        let g = fd::gradient(vs, &y, fd::gradient_step(&y));
        cap_err = cap_err.max(max_abs_diff(&c.grad_v_star(&y), &g));
        let exact = c.det_hess_v_star(&y)?;
        let approx = fd::hessian(vs, &y, fd::hessian_step(&y)).determinant();
        det_err = det_err.max(((approx - exact) / exact).abs());
    }
    let cap_gradient = CheckResult::leaf(
        "cap_gradient",
        n,
        angle,
        samples,
        seed,
        -cap_err,
        1e-8,
        "central-difference gradient of V*, step 1e-5",
    );
    let det = CheckResult::leaf(
        "cap_determinant",
        n,
        angle,
        samples,
        seed,
        -det_err,
        1e-5,
        "determinant of finite-difference Hessian of V*, step 1e-4, relative",
    );

    // C¹ matching: straddle the cone along its normal in the (|y'|, y_n) plane
    let mut rng = rng_for(seed, 5);
    let mut jump: f64 = 0.0;
    let delta = 1e-7;
    for _ in 0..samples {
        let u = unit(&uniform_vec(&mut rng, n - 1, 0.02, 1.0));
        let (co, si) = (angle.cos(), angle.sin());
        let at = |t: f64| -> Vec<f64> {
            let mut y: Vec<f64> = u.iter().map(|v| v * (si - t * co)).collect();
            y.push(co + t * si);
            y
        };
        jump = jump.max(max_abs_diff(&c.grad_v_star(&at(delta)), &c.grad_v_star(&at(-delta))));
    }
    let matching = CheckResult::leaf(
        "cone_matching",
        n,
        angle,
        samples,
        seed,
        -jump,
        1e-5,
        "gradient jump across the critical cone at distance 1e-7",
    );

    let boxes = 5;
    let mut rng = rng_for(seed, 6);
    let mut ma_err: f64 = 0.0;
    let mut made = 0;
    while made < boxes {
        let y = sample_region(&mut rng, n, angle, true, 0.05);
        let side = 0.05;
        let lo: Vec<f64> = y.iter().map(|v| v - 0.5 * side).collect();
        let hi: Vec<f64> = y.iter().map(|v| v + 0.5 * side).collect();
        if !box_in_cap_region(&lo, &hi, angle) {
            continue;
        }
        made += 1;
        let image = image_volume(&c, &lo, &hi);
        let mass = box_integral(&lo, &hi, |z| {
            (1.0 - z[n - 1] / norm(z) * angle.cos()).powi(n as i32 + 1)
        });
        ma_err = ma_err.max(((image - mass) / mass).abs());
    }
    let monge_ampere = CheckResult::leaf(
        "monge_ampere_mass",
        n,
        angle,
        boxes,
        seed,
        -ma_err,
        1e-4,
        "volume of the gradient image of a box vs Gauss quadrature of the determinant, relative",
    );

    Ok(CheckResult::group(
        "lemma2",
        n,
        angle,
        seed,
        vec![cylinder, cap_gradient, det, matching, monge_ampere],
    ))
}

fn box_in_cap_region(lo: &[f64], hi: &[f64], angle: &ContactAngle) -> bool {
    let n = lo.len();
    (0..1usize << n).all(|mask| {
        let v: Vec<f64> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
            .collect();
        v.iter().all(|x| *x > 0.0) && v[n - 1] > norm(&v) * angle.cos()
    })
}

fn box_integral<F: Fn(&[f64]) -> f64>(lo: &[f64], hi: &[f64], f: F) -> f64 {
    let n = lo.len();
    let rules: Vec<_> = (0..n).map(|i| gauss_legendre_on(16, lo[i], hi[i])).collect();
    let mut acc = 0.0;
    let mut idx = vec![0usize; n];
    let mut z = vec![0.0; n];
    loop {
        let mut w = 1.0;
        for i in 0..n {
            z[i] = rules[i].0[idx[i]];
            w *= rules[i].1[idx[i]];
        }
        acc += w * f(&z);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < 16 {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                return acc;
            }
        }
    }
}

/// Volume enclosed by `DV*(∂box)`: shoelace in the plane, signed tetrahedra
/// over a triangulated boundary in space.
fn image_volume(c: &DoubledCap, lo: &[f64], hi: &[f64]) -> f64 {
    let n = lo.len();
    if n == 2 {
        let m = 2000;
        let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
        let mut pts = Vec::with_capacity(4 * m);
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            for j in 0..m {
                let t = j as f64 / m as f64;
                pts.push(c.grad_v_star(&[a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]));
            }
        }
        let mut area = 0.0;
        for k in 0..pts.len() {
            let (p, q) = (&pts[k], &pts[(k + 1) % pts.len()]);
            area += p[0] * q[1] - p[1] * q[0];
        }
        0.5 * area
    } else {
        let m = 120;
        let mut vol = 0.0;
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            for (side, sign) in [(hi[k], 1.0), (lo[k], -1.0)] {
                let point = |a: usize, b: usize| {
                    let mut z = [0.0; 3];
                    z[k] = side;
                    z[i] = lo[i] + (hi[i] - lo[i]) * a as f64 / m as f64;
                    z[j] = lo[j] + (hi[j] - lo[j]) * b as f64 / m as f64;
                    c.grad_v_star(&z)
                };
                let grid: Vec<Vec<Vec<f64>>> =
                    (0..=m).map(|a| (0..=m).map(|b| point(a, b)).collect()).collect();
                for a in 0..m {
                    for b in 0..m {
                        let (p00, p10) = (&grid[a][b], &grid[a + 1][b]);
                        let (p11, p01) = (&grid[a + 1][b + 1], &grid[a][b + 1]);
                        vol += sign * (triple(p00, p10, p11) + triple(p00, p11, p01));
                    }
                }
            }
        }
        vol / 6.0
    }
}

fn triple(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Range, inverse and Jacobian of the gradient map `DV`, and monotonicity of
/// the profile `f(φ) = sinθ sinφ / (cosθ + cosφ)`.
pub fn check_lemma3(n: usize, angle: &ContactAngle, samples: usize, seed: u64) -> Result<CheckResult> {
    dims(n)?;
    angle.require_acute()?;
    let c = DoubledCap::new(*angle)?;
    let mut rng = rng_for(seed, 7);
    let (mut min_gap, mut trip, mut det_err) = (f64::INFINITY, 0.0f64, 0.0f64);
    let v = |x: &[f64]| c.v(x);
    let vs = |y: &[f64]| c.v_star(y);
    for _ in 0..samples {
        let x = OrthantPoint::new(uniform_vec(&mut rng, n, 0.1, 10.0))?;
        let y = c.forward_map(&x)?;
        let ys = y.as_slice();
        min_gap = min_gap.min(c.range_gap(ys) / norm(ys));
        trip = trip.max(max_abs_diff(&c.grad_v_star(ys), x.as_slice()));
        // both Hessians are 0-homogeneous: difference at unit scale
        let xu = unit(x.as_slice());
        let yu = unit(ys);
        let dv = fd::hessian(v, &xu, fd::hessian_step(&xu)).determinant();
        let dvs = fd::hessian(vs, &yu, fd::hessian_step(&yu)).determinant();
        det_err = det_err.max((dv * dvs - 1.0).abs());
    }
    let range = CheckResult::leaf(
        "range",
        n,
        angle,
        samples,
        seed,
        min_gap,
        crate::cap::RANGE_TOL,
        "y_n - |y| cos(theta) at the image point, relative to |y|",
    );
    let round_trip = CheckResult::leaf(
        "round_trip",
        n,
        angle,
        samples,
        seed,
        -trip,
        1e-8,
        "composition DV* after DV",
    );
    let det_product = CheckResult::leaf(
        "det_product",
        n,
        angle,
        samples,
        seed,
        -det_err,
        1e-6,
        "product of finite-difference Hessian determinants, step 1e-4",
    );

    let grid = 2000;
    let mut prev = range_profile(0.0, angle);
    let mut worst_step = f64::INFINITY;
    for k in 1..grid {
        let phi = FRAC_PI_2 * k as f64 / grid as f64;
        let f = range_profile(phi, angle);
        worst_step = worst_step.min(f - prev);
        prev = f;
    }
    let monotone = CheckResult::leaf(
        "profile_increasing",
        n,
        angle,
        grid,
        seed,
        worst_step,
        0.0,
        "smallest increment of the profile on a uniform grid in (0, pi/2)",
    );
    // f(π/2 − δ) = tanθ (1 − δ/cosθ + O(δ²)), so the offset scales with cosθ
    let delta = 1e-6 * angle.cos();
    let tan = angle.sin() / angle.cos();
    let limit_err = (range_profile(FRAC_PI_2 - delta, angle) / tan - 1.0).abs();
    let limit = CheckResult::leaf(
        "profile_limit",
        n,
        angle,
        1,
        seed,
        -limit_err,
        1e-5,
        "profile at pi/2 - 1e-6 cos(theta) relative to tan(theta)",
    );
    Ok(CheckResult::group(
        "lemma3",
        n,
        angle,
        seed,
        vec![range, round_trip, det_product, monotone, limit],
    ))
}

/// Smallest `⟨a, DV(b)⟩ − 2V(√(ab))` over seeded unit pairs, together with
/// the largest `|gap|` at `a = b`. The gradient is taken by central
/// differences so the observation also runs for obtuse angles.
pub fn two_concavity_gaps(n: usize, angle: &ContactAngle, samples: usize, seed: u64) -> (f64, f64) {
    let v = |x: &[f64]| potential_v(x, angle);
    let closed = DoubledCap::new(*angle).ok();
    let grad = |x: &[f64]| match &closed {
        Some(c) => c.grad_v_signed(x),
        None => fd::gradient(v, x, fd::gradient_step(x)),
    };
    let mut rng = rng_for(seed, 8);
    let (mut min_gap, mut diag) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let a = unit(&uniform_vec(&mut rng, n, 0.02, 1.0));
        let b = unit(&uniform_vec(&mut rng, n, 0.02, 1.0));
        let g: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x * y).sqrt()).collect();
        min_gap = min_gap.min(dot(&a, &grad(&b)) - 2.0 * v(&g));
        diag = diag.max((dot(&a, &grad(&a)) - 2.0 * v(&a)).abs());
    }
    (min_gap, diag)
}

pub fn check_two_concavity(n: usize, angle: &ContactAngle, samples: usize, seed: u64) -> Result<CheckResult> {
    dims(n)?;
    angle.require_acute()?;
    let (min_gap, diag) = two_concavity_gaps(n, angle, samples, seed);
    let pairs = CheckResult::leaf(
        "random_pairs",
        n,
        angle,
        samples,
        seed,
        min_gap,
        1e-10,
        "closed-form gradient of V at seeded pairs",
    );
    let equality = CheckResult::leaf(
        "equality_at_diagonal",
        n,
        angle,
        samples,
        seed,
        -diag,
        1e-10,
        "Euler identity at a = b",
    );
    Ok(CheckResult::group("two_concavity", n, angle, seed, vec![pairs, equality]))
}

/// `c = ∫₀^∞ e^{−s²/2} s^{n−1} ds` by Gauss quadrature on `[0, 12]`.
pub fn gaussian_moment(n: usize) -> f64 {
    let (s, w) = gauss_legendre_on(96, 0.0, 12.0);
    s.iter()
        .zip(&w)
        .map(|(s, w)| w * (-0.5 * s * s).exp() * s.powi(n as i32 - 1))
        .sum()
}

/// Minimum of a 1-homogeneous function over unit directions of the orthant,
/// sampled on a fine angular grid.
fn min_on_orthant_sphere<F: Fn(&[f64]) -> f64>(n: usize, f: F) -> f64 {
    let m = 200;
    let step = FRAC_PI_2 / m as f64;
    let mut best = f64::INFINITY;
    for i in 0..=m {
        let a = i as f64 * step;
        if n == 2 {
            best = best.min(f(&[a.cos(), a.sin()]));
        } else {
            for j in 0..=m {
                let b = j as f64 * step;
                best = best.min(f(&[a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]));
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KeyInequality {
    /// `∫ e^{−½p_K²}`.
    pub body: McEstimate,
    /// `∫_{y_n > |y|cosθ} e^{−½h_K²} (1 − y_n cosθ/|y|)^{n+1}`.
    pub polar: McEstimate,
    /// `∫ e^{−V}`.
    pub cap: McEstimate,
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `rhs − lhs` from independent estimates.
    pub std_error: f64,
}

/// The three orthant integrals of the key inequality, by Monte Carlo.
pub fn key_inequality(body: &BodySpec, angle: &ContactAngle, samples: usize, seed: u64) -> Result<KeyInequality> {
    angle.require_acute()?;
    let n = body.dim();
    dims(n)?;
    if matches!(body.kind(), BodyKind::CustomRadial(_)) {
        return Err(Error::NoPolarGauge(body.kind().tag().into()));
    }
    let c = DoubledCap::new(*angle)?;
    let cfg = |stream: u64, m: f64| McConfig {
        samples,
        seed,
        stream,
        scale: 1.0 / (0.95 * m),
    };
    let pk = min_on_orthant_sphere(n, |u| body.gauge(u));
    let a = orthant_mc(n, |x| (-0.5 * body.gauge(x).powi(2)).exp(), cfg(11, pk))?;
    let hk = min_on_orthant_sphere(n, |u| body.support(u));
    let cos = angle.cos();
    let b = orthant_mc(
        n,
        |y| {
            let r = norm(y);
            if y[n - 1] > r * cos {
                let h = body.polar_gauge(y).unwrap_or(f64::NAN);
                (-0.5 * h * h).exp() * (1.0 - y[n - 1] / r * cos).powi(n as i32 + 1)
            } else {
                0.0
            }
        },
        cfg(12, hk),
    )?;
    let pc = min_on_orthant_sphere(n, |u| c.gauge(u));
    let g = orthant_mc(n, |x| (-c.v(x)).exp(), cfg(13, pc))?;
    let lhs = a.estimate * b.estimate;
    let rhs = g.estimate * g.estimate;
    let std_error = ((b.estimate * a.std_error).powi(2)
        + (a.estimate * b.std_error).powi(2)
        + (2.0 * g.estimate * g.std_error).powi(2))
    .sqrt();
    Ok(KeyInequality {
        body: a,
        polar: b,
        cap: g,
        lhs,
        rhs,
        std_error,
    })
}

/// `∫ e^{−½p_C²} = (n c / 2^{n−1}) vol(Ĉ_θ)`.
pub fn gaussian_cap_integral(n: usize, angle: &ContactAngle) -> Result<f64> {
    Ok(n as f64 * gaussian_moment(n) / 2f64.powi(n as i32 - 1) * vol_cap_hat(n, angle)?)
}

/// Polar-coordinate Gauss rule on the planar orthant for the three
/// integrals, with the angular panel split at the critical ray.
pub fn key_inequality_grid(body: &BodySpec, angle: &ContactAngle) -> Result<(f64, f64, f64)> {
    if body.dim() != 2 {
        return Err(Error::UnsupportedDimension(body.dim(), "n = 2"));
    }
    let c = DoubledCap::new(*angle)?;
    let split = FRAC_PI_2 - angle.theta();
    let mut phis = Vec::new();
    let mut wphi = Vec::new();
    for (a, b) in [(0.0, split), (split, FRAC_PI_2)] {
        for panel in 0..8 {
            let (lo, hi) = (a + (b - a) * panel as f64 / 8.0, a + (b - a) * (panel + 1) as f64 / 8.0);
            let (p, w) = gauss_legendre_on(24, lo, hi);
            phis.extend(p);
            wphi.extend(w);
        }
    }
    // e^{−½g²r²} r integrates to 1/g² over r ∈ (0, ∞)
    let radial = |g: f64| 1.0 / (g * g);
    let (mut a, mut bb, mut cc) = (0.0, 0.0, 0.0);
    for (phi, w) in phis.iter().zip(&wphi) {
        let u = [phi.cos(), phi.sin()];
        a += w * radial(body.gauge(&u));
        cc += w * radial(c.gauge(&u));
        if u[1] > angle.cos() {
            bb += w * radial(body.support(&u)) * (1.0 - u[1] * angle.cos()).powi(3);
        }
    }
    Ok((a, bb, cc))
}

pub fn check_key_inequality(body: &BodySpec, angle: &ContactAngle, samples: usize, seed: u64) -> Result<CheckResult> {
    let n = body.dim();
    let k = key_inequality(body, angle, samples, seed)?;
    let main = CheckResult::leaf(
        "inequality",
        n,
        angle,
        samples,
        seed,
        k.rhs - k.lhs,
        3.0 * k.std_error,
        "importance-sampled Monte Carlo, 3 combined standard errors",
    )
    .with_detail("lhs", k.lhs)
    .with_detail("rhs", k.rhs)
    .with_detail("std_error", k.std_error);
    let exact = gaussian_cap_integral(n, angle)?;
    let gauss = CheckResult::leaf(
        "gaussian_identity",
        n,
        angle,
        samples,
        seed,
        -(k.cap.estimate - exact).abs(),
        3.0 * k.cap.std_error,
        "Monte Carlo of exp(-V) against the cap volume formula, 3 standard errors",
    )
    .with_detail("estimate", k.cap.estimate)
    .with_detail("exact", exact);
    let mut parts = vec![main, gauss];
    if n == 2 {
        let (a, b, c) = key_inequality_grid(body, angle)?;
        let dev = [
            (k.body.estimate - a) / k.body.std_error,
            (k.polar.estimate - b) / k.polar.std_error,
            (k.cap.estimate - c) / k.cap.std_error,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
        parts.push(
            CheckResult::leaf(
                "grid_cross_check",
                n,
                angle,
                samples,
                seed,
                -dev,
                3.0,
                "polar Gauss grid; deviation of each estimate in standard errors",
            )
            .with_detail("grid_lhs", a * b)
            .with_detail("grid_rhs", c * c),
        );
    }
    Ok(CheckResult::group(
        format!("key_inequality[{}]", body.name()),
        n,
        angle,
        seed,
        parts,
    ))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, PI};

    use approx::assert_abs_diff_eq;

    use super::*;

    fn ang(t: f64) -> ContactAngle {
        ContactAngle::new(t).unwrap()
    }

    #[test]
    fn lemma1_passes_for_acute_and_fails_for_obtuse() {
        for n in [2, 3] {
            let r = check_lemma1(n, &ang(FRAC_PI_3), 100, 1).unwrap();
            assert!(r.passed, "{r:#?}");
            let bad = check_lemma1(n, &ang(2.0 * PI / 3.0), 100, 1).unwrap();
            assert!(!bad.passed);
            assert!(!bad.component("concavity").unwrap().passed);
            assert!(check_lemma1_obtuse(n, &ang(2.0 * PI / 3.0), 100, 1).unwrap().passed);
        }
        let (lo, hi) = sqrt_potential_eigs(3, &ang(FRAC_PI_2), 50, 2);
        assert!(lo.abs() < 1e-8 && hi.abs() < 1e-8);
    }

    #[test]
    fn lemma2_and_lemma3_pass() {
        for n in [2, 3] {
            for t in [FRAC_PI_6, FRAC_PI_3] {
                let r = check_lemma2(n, &ang(t), 50, 3).unwrap();
                assert!(r.passed, "{r:#?}");
                let r = check_lemma3(n, &ang(t), 50, 3).unwrap();
                assert!(r.passed, "{r:#?}");
            }
        }
        assert!(check_lemma2(2, &ang(FRAC_PI_2), 10, 3).is_err());
    }

    #[test]
    fn two_concavity_holds_and_obtuse_is_recorded() {
        for n in [2, 3] {
            assert!(check_two_concavity(n, &ang(FRAC_PI_3), 1000, 4).unwrap().passed);
        }
        let (gap, _) = two_concavity_gaps(2, &ang(2.0 * PI / 3.0), 1000, 4);
        assert!(gap.is_finite());
    }

    #[test]
    fn gaussian_moment_values() {
        // c = √(π/2), 1, √(π/2)·1 for n = 1, 2, 3
        assert_abs_diff_eq!(gaussian_moment(1), (PI / 2.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(gaussian_moment(2), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gaussian_moment(3), (PI / 2.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn key_inequality_equality_and_strict() {
        let a = ang(FRAC_PI_3);
        let cap = BodySpec::double_cap(2, a, 1.0).unwrap();
        let k = key_inequality(&cap, &a, 200_000, 5).unwrap();
        assert!((k.rhs - k.lhs).abs() <= 3.0 * k.std_error, "{k:?}");
        let ball = BodySpec::ball(2, 1.0).unwrap();
        let r = check_key_inequality(&ball, &a, 200_000, 5).unwrap();
        assert!(r.passed, "{r:#?}");
        let radial = BodySpec::custom_radial_from(&ball, 16).unwrap();
        assert!(key_inequality(&radial, &a, 20_000, 5).is_err());
    }

    #[test]
    fn right_angle_gaussian_identity() {
        // θ = π/2: V = |x|²/2 and the cap is the half ball
        for n in [2, 3] {
            let exact = gaussian_cap_integral(n, &ang(FRAC_PI_2)).unwrap();
            let est = orthant_mc(
                n,
                |x| (-0.5 * dot(x, x)).exp(),
                McConfig {
                    samples: 100_000,
                    seed: 1,
                    stream: 0,
                    scale: 1.0,
                },
            )
            .unwrap();
            // the proposal matches the integrand, so the estimate is exact
            assert_abs_diff_eq!(est.estimate, exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn grid_matches_closed_form_for_cap() {
        let a = ang(FRAC_PI_3);
        let cap = BodySpec::double_cap(2, a, 1.0).unwrap();
        let (x, y, z) = key_inequality_grid(&cap, &a).unwrap();
        let exact = gaussian_cap_integral(2, &a).unwrap();
        assert_abs_diff_eq!(x, exact, epsilon = 1e-10);
        assert_abs_diff_eq!(y, exact, epsilon = 1e-10);
        assert_abs_diff_eq!(z, exact, epsilon = 1e-10);
    }
}
