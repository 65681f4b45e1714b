//! The centro-affine Laplacian on the cap, the linearized inequality and the
//! second variation of the volume product at the cap.
//!
//! Functions live on the nodes of a Gauss cap rule. In the plane the rule is a
//! single Gauss–Legendre panel in `φ` and derivatives come from the
//! interpolating polynomial. In three dimensions the rule is a tensor of Gauss
//! nodes in the polar angle `α` and midpoints in azimuth; azimuthal
//! derivatives are trigonometric.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cap::ContactAngle;
use crate::error::{Error, Result};
use crate::quadrature::{cap_rule, Layout, QuadratureRule};
use crate::spectral::{mat_vec, periodic_second_derivative, Barycentric};

pub const MIN_SPECTRAL_RESOLUTION: usize = 8;
/// Largest admitted conormal derivative of `f` for the linearized inequality.
pub const NEUMANN_ABORT: f64 = 1e-4;
pub const NEUMANN_TOL: f64 = 1e-6;
/// Tolerance on `∇̄_μψ − cotθ ψ` for the second variation.
pub const CAPILLARY_BC_TOL: f64 = 1e-5;

/// Nodal values of a function on the cap.
#[derive(Clone, Debug)]
pub struct CapFunction {
    n: usize,
    angle: ContactAngle,
    resolution: usize,
    rule: QuadratureRule,
    values: Vec<f64>,
    /// Polar-coordinate nodes: `φ` for `n = 2`, `α` for `n = 3`.
    grid: Vec<f64>,
    azimuths: usize,
    boundary: Vec<f64>,
    conormal: Vec<f64>,
}

impl CapFunction {
    pub fn from_values(
        n: usize,
        angle: &ContactAngle,
        resolution: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if resolution < MIN_SPECTRAL_RESOLUTION {
            return Err(Error::Resolution {
                got: resolution,
                min: MIN_SPECTRAL_RESOLUTION,
            });
        }
        let rule = cap_rule(n, angle, resolution)?;
        if values.len() != rule.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} nodal values, got {}",
                rule.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                node: rule.nodes[i].clone(),
                value: *v,
            });
        }
        let (grid, azimuths) = match &rule.layout {
            Layout::Arc { phi, .. } => (phi.clone(), 1),
            Layout::CapTensor { alpha, azimuths, .. } => (alpha.clone(), *azimuths),
            Layout::Scattered => unreachable!("cap rules carry a layout"),
        };
        let mut f = Self {
            n,
            angle: *angle,
            resolution,
            rule,
            values,
            grid,
            azimuths,
            boundary: Vec::new(),
            conormal: Vec::new(),
        };
        (f.boundary, f.conormal) = f.boundary_data();
        Ok(f)
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(
        n: usize,
        angle: &ContactAngle,
        resolution: usize,
        f: F,
    ) -> Result<Self> {
        let rule = cap_rule(n, angle, resolution.max(MIN_SPECTRAL_RESOLUTION))?;
        let values = rule.nodes.iter().map(|x| f(x)).collect();
        Self::from_values(n, angle, resolution, values)
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        let mut f = Self {
            values,
            boundary: Vec::new(),
            conormal: Vec::new(),
            ..self.clone()
        };
        (f.boundary, f.conormal) = f.boundary_data();
        f
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn angle(&self) -> &ContactAngle {
        &self.angle
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values at the rim: both endpoints for `n = 2`, one per azimuth for
    /// `n = 3`.
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary
    }

    /// Outward conormal derivatives `∇̄_μ f` at the rim, in the order of
    /// [`Self::boundary_values`].
    pub fn conormal_derivatives(&self) -> &[f64] {
        &self.conormal
    }

    fn boundary_data(&self) -> (Vec<f64>, Vec<f64>) {
        let interp = Barycentric::new(&self.grid);
        match self.n {
            2 => {
                let (lo, hi) = (FRAC_PI_2 - self.angle.theta(), FRAC_PI_2 + self.angle.theta());
                let (a, da) = interp.eval_with_derivative(&self.values, lo);
                let (b, db) = interp.eval_with_derivative(&self.values, hi);
                (vec![a, b], vec![-da, db])
            }
            _ => {
                let m = self.azimuths;
                let mut vals = Vec::with_capacity(m);
                let mut ders = Vec::with_capacity(m);
                for j in 0..m {
                    let col = self.column(j);
                    let (v, d) = interp.eval_with_derivative(&col, self.angle.theta());
                    vals.push(v);
                    ders.push(d);
                }
                (vals, ders)
            }
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.values[i * self.azimuths + j]).collect()
    }

    pub fn max_conormal(&self) -> f64 {
        self.conormal.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn is_neumann(&self) -> bool {
        self.max_conormal() <= NEUMANN_TOL
    }

    /// Largest change of the values under the coordinate reflections.
    pub fn symmetry_defect(&self) -> f64 {
        let v = &self.values;
        match self.n {
            2 => {
                let m = v.len();
                (0..m).map(|i| (v[i] - v[m - 1 - i]).abs()).fold(0.0, f64::max)
            }
            _ => {
                let m = self.azimuths;
                let mut worst = 0.0f64;
                for i in 0..self.grid.len() {
                    for j in 0..m {
                        let a = v[i * m + j];
                        // β → −β and β → π − β
                        let b1 = v[i * m + (m - 1 - j)];
                        let b2 = v[i * m + (m / 2 + m - 1 - j) % m];
                        worst = worst.max((a - b1).abs()).max((a - b2).abs());
                    }
                }
                worst
            }
        }
    }

    pub fn is_unconditional(&self) -> bool {
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        self.symmetry_defect() <= 1e-12 * scale
    }

    pub fn integrate(&self) -> f64 {
        self.rule.integrate_values(&self.values)
    }

    fn ell(&self) -> Vec<f64> {
        self.rule.nodes.iter().map(|x| self.angle.ell_at(x)).collect()
    }

    fn map(&self, g: impl Fn(usize, f64) -> f64) -> Self {
        self.with_values(self.values.iter().enumerate().map(|(i, v)| g(i, *v)).collect())
    }
}

/// `Δ̄g` for the round metric.
pub fn round_laplacian(g: &CapFunction) -> CapFunction {
    let d = Barycentric::new(&g.grid).diff_matrix();
    match g.n {
        2 => {
            let out = mat_vec(&d, &mat_vec(&d, &g.values));
            g.with_values(out)
        }
        _ => {
            let (na, m) = (g.grid.len(), g.azimuths);
            let sin: Vec<f64> = g.grid.iter().map(|a| a.sin()).collect();
            let cos: Vec<f64> = g.grid.iter().map(|a| a.cos()).collect();
            let mut out = vec![0.0; na * m];
            for j in 0..m {
                let col = g.column(j);
                let d1 = mat_vec(&d, &col);
                let d2 = mat_vec(&d, &d1);
                for i in 0..na {
                    out[i * m + j] = d2[i] + d1[i] * cos[i] / sin[i];
                }
            }
            for i in 0..na {
                let row = &g.values[i * m..(i + 1) * m];
                let dd = periodic_second_derivative(row);
                for j in 0..m {
                    out[i * m + j] += dd[j] / (sin[i] * sin[i]);
                }
            }
            g.with_values(out)
        }
    }
}

/// `Δ_{C_θ} f = Δ̄(fℓ) + (n − 1) f (ℓ − 1)`.
pub fn centroaffine_laplacian(f: &CapFunction) -> CapFunction {
    let ell = f.ell();
    let psi = f.map(|i, v| v * ell[i]);
    let lap = round_laplacian(&psi);
    let k = (f.n - 1) as f64;
    lap.map(|i, v| v + k * f.values[i] * (ell[i] - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem2Margin {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub max_conormal: f64,
}

/// `2n(∫f dV)²/∫dV − ∫f(Δ_{C_θ}f + 2nf) dV` with `dV = (1/n) ℓ dσ`.
pub fn theorem2_margin(f: &CapFunction) -> Result<Theorem2Margin> {
    f.angle.require_non_obtuse()?;
    if !f.is_unconditional() {
        return Err(Error::InvalidParameter(format!(
            "function is not unconditional (defect {:.3e})",
            f.symmetry_defect()
        )));
    }
    let max_conormal = f.max_conormal();
    if max_conormal > NEUMANN_ABORT {
        return Err(Error::BoundaryCondition {
            derivative: max_conormal,
            tolerance: NEUMANN_ABORT,
            context: "conormal derivative of f at the rim",
        });
    }
    let n = f.n as f64;
    let ell = f.ell();
    let lap = centroaffine_laplacian(f);
    let (mut lhs, mut mass, mut vol) = (0.0, 0.0, 0.0);
    for (i, w) in f.rule.weights.iter().enumerate() {
        let dv = w * ell[i] / n;
        let v = f.values[i];
        lhs += dv * v * (lap.values[i] + 2.0 * n * v);
        mass += dv * v;
        vol += dv;
    }
    let rhs = 2.0 * n * mass * mass / vol;
    Ok(Theorem2Margin {
        lhs,
        rhs,
        margin: rhs - lhs,
        max_conormal,
    })
}

/// A random even cosine series satisfying the Neumann condition exactly.
///
/// `n = 2`: `a₀ + Σ a_k cos(2kπ u)` with `u = (φ − π/2 + θ)/(2θ)`.
/// `n = 3`: `a₀ + Σ a_k cos(kπ α/θ)`, rotationally symmetric.
pub fn admissible_function(
    n: usize,
    angle: &ContactAngle,
    resolution: usize,
    modes: usize,
    seed: u64,
) -> Result<CapFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0: f64 = rng.random_range(0.5..2.0);
    let coeffs: Vec<f64> = (1..=modes)
        .map(|k| rng.random_range(-1.0..1.0) / k as f64)
        .collect();
    let theta = angle.theta();
    let series = |t: f64| a0 + coeffs.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * t).cos()).sum::<f64>();
    match n {
        2 => CapFunction::from_fn(2, angle, resolution, |x| {
            let phi = x[1].atan2(x[0]);
            let u = (phi - FRAC_PI_2 + theta) / (2.0 * theta);
            series(2.0 * PI * u)
        }),
        3 => CapFunction::from_fn(3, angle, resolution, |x| {
            let alpha = x[2].clamp(-1.0, 1.0).acos();
            series(PI * alpha / theta)
        }),
        _ => Err(Error::UnsupportedDimension(n, "n in {2, 3}")),
    }
}

/// Linearized-inequality margins for `count` seeded admissible functions.
pub fn theorem2_sweep(
    n: usize,
    angle: &ContactAngle,
    resolution: usize,
    modes: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<Theorem2Margin>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| theorem2_margin(&admissible_function(n, angle, resolution, modes, seed + k)?))
        .collect()
}

fn check_capillary_bc(psi: &CapFunction) -> Result<()> {
    let cot = psi.angle.cos() / psi.angle.sin();
    let worst = psi
        .conormal
        .iter()
        .zip(&psi.boundary)
        .map(|(d, v)| (d - cot * v).abs())
        .fold(0.0, f64::max);
    if worst > CAPILLARY_BC_TOL {
        return Err(Error::BoundaryCondition {
            derivative: worst,
            tolerance: CAPILLARY_BC_TOL,
            context: "conormal derivative of psi minus cot(theta) psi",
        });
    }
    if !psi.is_unconditional() {
        return Err(Error::InvalidParameter(format!(
            "psi is not even (defect {:.3e})",
            psi.symmetry_defect()
        )));
    }
    Ok(())
}

/// `d²/dt² P(ℓ + tψ)` at `t = 0` from
/// `n P″ = ∫ψ(Δ̄ψ + (n−1)ψ)·∫ℓ − 2n(∫ψ)² + (n+1)∫ℓ·∫ψ²/ℓ`, integrals in `dσ`.
pub fn second_variation(psi: &CapFunction) -> Result<f64> {
    check_capillary_bc(psi)?;
    let n = psi.n as f64;
    let ell = psi.ell();
    let lap = round_laplacian(psi);
    let w = &psi.rule.weights;
    let mut a = 0.0;
    let mut int_psi = 0.0;
    let mut int_ell = 0.0;
    let mut int_sq = 0.0;
    for i in 0..w.len() {
        let p = psi.values[i];
        a += w[i] * p * (lap.values[i] + (n - 1.0) * p);
        int_psi += w[i] * p;
        int_ell += w[i] * ell[i];
        int_sq += w[i] * p * p / ell[i];
    }
    Ok((a * int_ell - 2.0 * n * int_psi * int_psi + (n + 1.0) * int_ell * int_sq) / n)
}

/// `P(t) = vol(Σ̂_t)·vol(Σ̂*_t)` for `h_t = ℓ + tψ` in the plane, from the
/// reconstructed boundary `X = h x + h′ x⊥` and the polar boundary
/// `Y = (ℓ/h) ζ`, each closed by the chord joining its rim points.
pub fn perturbed_product(psi: &CapFunction, t: f64) -> Result<f64> {
    if psi.n != 2 {
        return Err(Error::UnsupportedDimension(psi.n, "n = 2"));
    }
    let c = psi.angle.cos();
    let ell = psi.ell();
    let interp = Barycentric::new(&psi.grid);
    let d = interp.diff_matrix();
    // ℓ is differentiated exactly and ψ once, so P is a smooth function of t
    // and the finite differences below see no amplified roundoff
    let dpsi = mat_vec(&d, &psi.values);
    let ddpsi = mat_vec(&d, &dpsi);
    let n_nodes = psi.grid.len();
    let mut h = Vec::with_capacity(n_nodes);
    let mut dh = Vec::with_capacity(n_nodes);
    let mut ddh = Vec::with_capacity(n_nodes);
    for (i, &phi) in psi.grid.iter().enumerate() {
        let (s, co) = phi.sin_cos();
        h.push(ell[i] + t * psi.values[i]);
        dh.push(-c * co + t * dpsi[i]);
        ddh.push(c * s + t * ddpsi[i]);
    }
    if let Some(m) = h
        .iter()
        .zip(&ddh)
        .map(|(a, b)| a + b)
        .find(|r| !(*r > 0.0))
    {
        return Err(Error::NotConvex(m));
    }
    let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    let mut area = 0.0;
    let mut polar = 0.0;
    for (i, &phi) in psi.grid.iter().enumerate() {
        let (s, co) = phi.sin_cos();
        let (x, xp) = ([co, s], [-s, co]);
        let bx = [h[i] * x[0] + dh[i] * xp[0], h[i] * x[1] + dh[i] * xp[1]];
        // X′ = (h + h″) x⊥
        let dbx = [(h[i] + ddh[i]) * xp[0], (h[i] + ddh[i]) * xp[1]];
        area += psi.rule.weights[i] * 0.5 * cross(bx, dbx);
        let zeta = [x[0], x[1] - c];
        let r = ell[i] / h[i];
        let dr = (-c * co * h[i] - ell[i] * dh[i]) / (h[i] * h[i]);
        let y = [r * zeta[0], r * zeta[1]];
        let dy = [dr * zeta[0] + r * xp[0], dr * zeta[1] + r * xp[1]];
        polar += psi.rule.weights[i] * 0.5 * cross(y, dy);
    }
    let theta = psi.angle.theta();
    let rim = |phi: f64| -> Result<([f64; 2], [f64; 2])> {
        let (s, co) = phi.sin_cos();
        let (l, dl) = (1.0 - c * s, -c * co);
        let (p, dp) = interp.eval_with_derivative(&psi.values, phi);
        let (hh, dhh) = (l + t * p, dl + t * dp);
        if !(hh > 0.0) {
            return Err(Error::NonPositiveSupport {
                index: 0,
                node: vec![co, s],
                value: hh,
            });
        }
        let bx = [hh * co - dhh * s, hh * s + dhh * co];
        let r = l / hh;
        Ok((bx, [r * co, r * (s - c)]))
    };
    let (x_lo, y_lo) = rim(FRAC_PI_2 - theta)?;
    let (x_hi, y_hi) = rim(FRAC_PI_2 + theta)?;
    area += 0.5 * cross(x_hi, x_lo);
    polar += 0.5 * cross(y_hi, y_lo);
    Ok(area * polar)
}

/// Five-point second difference of `P(t)` at `t = 0`.
pub fn fd_cross_check(psi: &CapFunction, t_step: f64) -> Result<f64> {
    let p = |k: f64| perturbed_product(psi, k * t_step);
    Ok((-p(2.0)? + 16.0 * p(1.0)? - 30.0 * p(0.0)? + 16.0 * p(-1.0)? - p(-2.0)?) / (12.0 * t_step * t_step))
}

/// Five-point first difference of `P(t)` at `t = 0`.
pub fn fd_first_variation(psi: &CapFunction, t_step: f64) -> Result<f64> {
    let p = |k: f64| perturbed_product(psi, k * t_step);
    Ok((-p(2.0)? + 8.0 * p(1.0)? - 8.0 * p(-1.0)? + p(-2.0)?) / (12.0 * t_step))
}

/// `ψ = fℓ` for an admissible `f`.
pub fn admissible_perturbation(
    angle: &ContactAngle,
    resolution: usize,
    modes: usize,
    seed: u64,
) -> Result<CapFunction> {
    let f = admissible_function(2, angle, resolution, modes, seed)?;
    let ell = f.ell();
    Ok(f.map(|i, v| v * ell[i]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecondVariationRow {
    pub seed: u64,
    pub formula: f64,
    pub finite_difference: f64,
    pub difference: f64,
}

pub fn second_variation_table(
    angle: &ContactAngle,
    resolution: usize,
    modes: usize,
    seeds: &[u64],
    t_step: f64,
) -> Result<Vec<SecondVariationRow>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let psi = admissible_perturbation(angle, resolution, modes, seed)?;
            let formula = second_variation(&psi)?;
            let finite_difference = fd_cross_check(&psi, t_step)?;
            Ok(SecondVariationRow {
                seed,
                formula,
                finite_difference,
                difference: (formula - finite_difference).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn angle(t: f64) -> ContactAngle {
        ContactAngle::new(t).unwrap()
    }

    #[test]
    fn round_laplacian_on_harmonics() {
        for n in [2, 3] {
            let a = angle(PI / 3.0);
            let g = CapFunction::from_fn(n, &a, 24, |x| x[n - 1]).unwrap();
            let lap = round_laplacian(&g);
            for (v, x) in lap.values().iter().zip(&g.rule().nodes) {
                assert_abs_diff_eq!(*v, -((n - 1) as f64) * x[n - 1], epsilon = 1e-8);
            }
            let one = CapFunction::from_fn(n, &a, 24, |_| 1.0).unwrap();
            assert!(round_laplacian(&one).values().iter().all(|v| v.abs() < 1e-8));
        }
        // Δ̄(x₁²) = 2 − 2n x₁² on S², from Δ(x₁²) = 2 and degree-2 homogeneity
        let a = angle(1.2);
        let g = CapFunction::from_fn(3, &a, 24, |x| x[0] * x[0]).unwrap();
        let lap = round_laplacian(&g);
        for (v, x) in lap.values().iter().zip(&g.rule().nodes) {
            assert_abs_diff_eq!(*v, 2.0 - 6.0 * x[0] * x[0], epsilon = 1e-6);
        }
    }

    #[test]
    fn resolution_floor() {
        let a = angle(1.0);
        assert!(matches!(
            CapFunction::from_fn(2, &a, 6, |_| 1.0),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn centroaffine_laplacian_identities() {
        for n in [2, 3] {
            let a = angle(PI / 5.0);
            let one = CapFunction::from_fn(n, &a, 24, |_| 1.0).unwrap();
            assert!(centroaffine_laplacian(&one).values().iter().all(|v| v.abs() < 1e-8));
        }
        // at a right angle ℓ ≡ 1 and the operator is the round Laplacian
        let right = angle(FRAC_PI_2);
        let f = CapFunction::from_fn(2, &right, 32, |x| x[0].powi(4) + x[1]).unwrap();
        let (l1, l2) = (centroaffine_laplacian(&f), round_laplacian(&f));
        for (p, q) in l1.values().iter().zip(l2.values()) {
            assert_abs_diff_eq!(*p, *q, epsilon = 1e-12);
        }
        // against the defining relation, derivatives taken analytically
        let a = angle(PI / 3.0);
        let c = a.cos();
        let f = CapFunction::from_fn(2, &a, 40, |x| 1.0 + 0.3 * x[0] * x[0]).unwrap();
        let lap = centroaffine_laplacian(&f);
        for (v, x) in lap.values().iter().zip(&f.rule().nodes) {
            let phi = x[1].atan2(x[0]);
            let (s, co) = phi.sin_cos();
            let g = 1.0 + 0.3 * co * co;
            let (dg, ddg) = (-0.3 * (2.0 * phi).sin(), -0.6 * (2.0 * phi).cos());
            let (l, dl, ddl) = (1.0 - c * s, -c * co, c * s);
            let psi_dd = ddg * l + 2.0 * dg * dl + g * ddl;
            let psi = g * l;
            assert_abs_diff_eq!(*v, psi_dd + psi - g, epsilon = 1e-9);
        }
    }

    #[test]
    fn theorem2_equality_at_constants() {
        for t in [PI / 6.0, PI / 3.0, 0.45 * PI] {
            for c in [1.0, 5.0] {
                for n in [2, 3] {
                    let f = CapFunction::from_fn(n, &angle(t), 32, |_| c).unwrap();
                    let m = theorem2_margin(&f).unwrap();
                    assert!(m.margin.abs() <= 1e-10 * c * c, "{m:?}");
                }
            }
        }
    }

    #[test]
    fn theorem2_bump_is_strict() {
        let a = angle(PI / 3.0);
        let f = CapFunction::from_fn(2, &a, 64, |x| {
            let u = (x[1].atan2(x[0]) - FRAC_PI_2 + a.theta()) / (2.0 * a.theta());
            1.0 + 0.1 * (2.0 * PI * u).cos()
        })
        .unwrap();
        assert!(theorem2_margin(&f).unwrap().margin > 0.0);
    }

    #[test]
    fn theorem2_sweeps_are_nonnegative() {
        for t in [PI / 6.0, PI / 3.0, 0.45 * PI] {
            for m in theorem2_sweep(2, &angle(t), 64, 8, 100, 20).unwrap() {
                assert!(m.margin >= -1e-7, "{m:?}");
            }
            for m in theorem2_sweep(3, &angle(t), 24, 4, 100, 5).unwrap() {
                assert!(m.margin >= -1e-7, "{m:?}");
            }
        }
    }

    #[test]
    fn hemisphere_poincare() {
        let right = angle(FRAC_PI_2);
        let f = CapFunction::from_fn(2, &right, 48, |x| x[0] * x[0] - 0.5).unwrap();
        assert!(f.is_neumann());
        // exact margin is 0: Δ̄f = −4f and ∫f = 0
        assert!(theorem2_margin(&f).unwrap().margin >= -1e-12);
    }

    #[test]
    fn neumann_violation_aborts() {
        let a = angle(PI / 3.0);
        let f = CapFunction::from_fn(2, &a, 32, |x| 1.0 + x[1]).unwrap();
        assert!(matches!(theorem2_margin(&f), Err(Error::BoundaryCondition { .. })));
        let g = CapFunction::from_fn(2, &a, 32, |x| 1.0 + x[0]).unwrap();
        assert!(!g.is_unconditional());
        assert!(theorem2_margin(&g).is_err());
    }

    #[test]
    fn boundary_condition_equivalence() {
        // ∇̄_μψ − cotθ ψ = sin²θ ∇̄_μ f on the rim for ψ = fℓ, any f
        for n in [2, 3] {
            let a = angle(0.9);
            let f = CapFunction::from_fn(n, &a, 24, |x| (1.3 * x[n - 1]).exp() + x[0] * x[0]).unwrap();
            let ell = f.ell();
            let psi = f.map(|i, v| v * ell[i]);
            let cot = a.cos() / a.sin();
            for k in 0..f.boundary_values().len() {
                let lhs = psi.conormal_derivatives()[k] - cot * psi.boundary_values()[k];
                let rhs = a.sin().powi(2) * f.conormal_derivatives()[k];
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn scaling_direction_is_flat() {
        let a = angle(PI / 3.0);
        let psi = CapFunction::from_fn(2, &a, 48, |x| a.ell_at(x)).unwrap();
        assert!(second_variation(&psi).unwrap().abs() < 1e-8);
        assert!(fd_cross_check(&psi, 1e-3).unwrap().abs() < 1e-8);
        let f_one = admissible_perturbation(&a, 48, 0, 3).unwrap();
        let scale = f_one.values()[0] / a.ell_at(&f_one.rule().nodes[0]);
        assert!(second_variation(&f_one).unwrap().abs() < 1e-8 * scale * scale);
        let psi3 = CapFunction::from_fn(3, &a, 16, |x| a.ell_at(x)).unwrap();
        assert!(second_variation(&psi3).unwrap().abs() < 1e-8);
    }

    #[test]
    fn second_variation_matches_finite_differences() {
        let a = angle(PI / 3.0);
        let rows = second_variation_table(&a, 64, 6, &[1, 2, 3, 4, 5], 1e-3).unwrap();
        for r in rows {
            assert!(r.difference <= 1e-4, "{r:?}");
        }
    }

    #[test]
    fn cap_is_stationary() {
        let a = angle(PI / 4.0);
        for seed in 0..3 {
            let psi = admissible_perturbation(&a, 48, 5, seed).unwrap();
            assert!(fd_first_variation(&psi, 1e-3).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn large_steps_lose_convexity() {
        let a = angle(PI / 3.0);
        let psi = admissible_perturbation(&a, 48, 8, 9).unwrap();
        assert!(matches!(perturbed_product(&psi, -50.0), Err(Error::NotConvex(_)) | Err(Error::NonPositiveSupport { .. })));
    }

    #[test]
    fn capillary_condition_is_enforced() {
        let a = angle(PI / 3.0);
        let psi = CapFunction::from_fn(2, &a, 32, |_| 1.0).unwrap();
        assert!(matches!(second_variation(&psi), Err(Error::BoundaryCondition { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn laplacian_is_self_adjoint(s1 in 0u64..1000, s2 in 0u64..1000, t in 0.2f64..1.5) {
            let a = angle(t);
            let f = admissible_function(2, &a, 48, 6, s1).unwrap();
            let g = admissible_function(2, &a, 48, 6, s2).unwrap();
            let (lf, lg) = (round_laplacian(&f), round_laplacian(&g));
            let w = &f.rule().weights;
            let fg: f64 = (0..w.len()).map(|i| w[i] * lf.values()[i] * g.values()[i]).sum();
            let gf: f64 = (0..w.len()).map(|i| w[i] * f.values()[i] * lg.values()[i]).sum();
            prop_assert!((fg - gf).abs() <= 1e-8);
        }

        #[test]
        fn admissible_functions_are_admissible(seed in 0u64..10_000, t in 0.1f64..1.5, n in 2usize..4) {
            let f = admissible_function(n, &angle(t), 48, 6, seed).unwrap();
            prop_assert!(f.is_unconditional());
            prop_assert!(f.is_neumann());
        }
    }
}
