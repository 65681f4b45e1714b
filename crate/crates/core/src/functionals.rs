//! Integral functionals on the cap: volume of `Ĉ_θ`, polar volume, the
//! capillary volume product and the `L_p` / log functionals.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bodies::{BodySpec, CapillaryBody};
use crate::cap::ContactAngle;
use crate::error::{Error, Result};
use crate::quadrature::{Layout, QuadratureRule};

/// `vol(Ĉ_θ)` in closed form.
pub fn vol_cap_hat(n: usize, angle: &ContactAngle) -> Result<f64> {
    angle.require_non_obtuse()?;
    let (c, s) = (angle.cos(), angle.sin());
    match n {
        2 => Ok(angle.theta() - s * c),
        3 => Ok(PI * (1.0 - c).powi(2) * (2.0 + c) / 3.0),
        _ => Err(Error::UnsupportedDimension(n, "n in {2, 3}")),
    }
}

/// Node count in the polar/arc parameter of a cap rule.
pub fn rule_resolution(rule: &QuadratureRule) -> usize {
    match &rule.layout {
        Layout::Arc { phi, .. } => phi.len(),
        Layout::CapTensor { alpha, .. } => alpha.len(),
        Layout::Scattered => rule.len(),
    }
}

fn cap_angle(rule: &QuadratureRule) -> Result<(usize, ContactAngle)> {
    match rule.domain {
        crate::quadrature::Domain::Cap { theta, n } => Ok((n, ContactAngle::new(theta)?)),
        _ => Err(Error::InvalidParameter("expected a cap quadrature rule".into())),
    }
}

/// `∫ ℓ^{n+1} / hⁿ dσ` over the cap with `h` evaluated at the sphere
/// representative. Nonpositive `h` at a node aborts.
fn ell_power_integral<H: Fn(&[f64]) -> f64>(rule: &QuadratureRule, h: H) -> Result<f64> {
    let (n, angle) = cap_angle(rule)?;
    let mut acc = 0.0;
    for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let s = h(x);
        if !(s > 0.0) {
            return Err(Error::NonPositiveSupport {
                index: i,
                node: x.clone(),
                value: s,
            });
        }
        let l = angle.ell_at(x);
        acc += w * l * (l / s).powi(n as i32);
    }
    Ok(acc)
}

/// `vol(Σ̂*) = (1/n) ∫ ℓ^{n+1} / s_Σⁿ dσ`.
pub fn polar_volume(cb: &CapillaryBody, rule: &QuadratureRule) -> Result<f64> {
    let (n, _) = cap_angle(rule)?;
    Ok(ell_power_integral(rule, |x| cb.base.support(x))? / n as f64)
}

/// The same volume written as `∫ σ_Σ^{-n} dV` with `σ_Σ = s_Σ/ℓ` and the cone
/// volume measure `dV = (1/n) ℓ dσ`.
pub fn polar_volume_cone(cb: &CapillaryBody, rule: &QuadratureRule) -> Result<f64> {
    let (n, angle) = cap_angle(rule)?;
    let mut acc = 0.0;
    for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let s = cb.base.support(x);
        if !(s > 0.0) {
            return Err(Error::NonPositiveSupport {
                index: i,
                node: x.clone(),
                value: s,
            });
        }
        let l = angle.ell_at(x);
        let dv = w * l / n as f64;
        acc += dv / (s / l).powi(n as i32);
    }
    Ok(acc)
}

/// `vol(K)/(2n) ∫ ℓ^{n+1} / h_Kⁿ dσ`.
pub fn theorem1_lhs(body: &BodySpec, angle: &ContactAngle, rule: &QuadratureRule) -> Result<f64> {
    angle.require_acute()?;
    let (n, rule_angle) = cap_angle(rule)?;
    check_rule(body, angle, n, &rule_angle)?;
    let integral = ell_power_integral(rule, |x| body.support(x))?;
    Ok(body.volume() / (2.0 * n as f64) * integral)
}

fn check_rule(body: &BodySpec, angle: &ContactAngle, n: usize, rule_angle: &ContactAngle) -> Result<()> {
    if body.dim() != n {
        return Err(Error::InvalidParameter(format!(
            "body is {}-dimensional, rule is {n}-dimensional",
            body.dim()
        )));
    }
    if (rule_angle.theta() - angle.theta()).abs() > 1e-15 {
        return Err(Error::InvalidParameter(format!(
            "rule built for theta = {}, asked for {}",
            rule_angle.theta(),
            angle.theta()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumeProductReport {
    pub name: String,
    pub n: usize,
    pub theta: f64,
    pub vol_hat: f64,
    pub vol_polar: f64,
    pub product: f64,
    pub bound: f64,
    pub margin: f64,
    pub resolution: usize,
}

impl VolumeProductReport {
    pub const CSV_HEADER: &'static str =
        "name,n,theta,vol_hat,vol_polar,product,bound,margin,resolution";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{}",
            csv_field(&self.name),
            self.n,
            self.theta,
            self.vol_hat,
            self.vol_polar,
            self.product,
            self.bound,
            self.margin,
            self.resolution
        )
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `vol(Σ̂)·vol(Σ̂*)` against `vol(Ĉ_θ)²`, with `vol(Σ̂) = vol(K)/2`.
pub fn volume_product(cb: &CapillaryBody, rule: &QuadratureRule) -> Result<VolumeProductReport> {
    cb.angle.require_acute()?;
    let (n, rule_angle) = cap_angle(rule)?;
    check_rule(&cb.base, &cb.angle, n, &rule_angle)?;
    let vol_hat = cb.base.volume() / 2.0;
    let vol_polar = polar_volume(cb, rule)?;
    let product = vol_hat * vol_polar;
    let bound = vol_cap_hat(n, &cb.angle)?.powi(2);
    Ok(VolumeProductReport {
        name: cb.base.name().to_string(),
        n,
        theta: cb.angle.theta(),
        vol_hat,
        vol_polar,
        product,
        bound,
        margin: bound - product,
        resolution: rule_resolution(rule),
    })
}

/// `K` rescaled to `vol(K) = vol(C) = 2 vol(Ĉ_θ)`.
pub fn normalize(body: &BodySpec, angle: &ContactAngle) -> Result<BodySpec> {
    let target = 2.0 * vol_cap_hat(body.dim(), angle)?;
    let lambda = (target / body.volume()).powf(1.0 / body.dim() as f64);
    body.scaled(lambda)
}

/// `E_p(K) = ∫ (h_K/h_C)^p h_C dσ`, with `h_C = ℓ` on the cap.
pub fn e_p(body: &BodySpec, angle: &ContactAngle, p: f64, rule: &QuadratureRule) -> Result<f64> {
    angle.require_acute()?;
    if p == 0.0 || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("E_p needs finite p != 0, got {p}")));
    }
    let (n, rule_angle) = cap_angle(rule)?;
    check_rule(body, angle, n, &rule_angle)?;
    positive_support(body, rule)?;
    rule.integrate(|x| {
        let l = angle.ell_at(x);
        (body.support(x) / l).powf(p) * l
    })
}

/// `∫ h_C log h_K dσ`.
pub fn log_functional(body: &BodySpec, angle: &ContactAngle, rule: &QuadratureRule) -> Result<f64> {
    angle.require_acute()?;
    let (n, rule_angle) = cap_angle(rule)?;
    check_rule(body, angle, n, &rule_angle)?;
    positive_support(body, rule)?;
    rule.integrate(|x| angle.ell_at(x) * body.support(x).ln())
}

fn positive_support(body: &BodySpec, rule: &QuadratureRule) -> Result<()> {
    for (i, x) in rule.nodes.iter().enumerate() {
        let s = body.support(x);
        if !(s > 0.0) {
            return Err(Error::NonPositiveSupport {
                index: i,
                node: x.clone(),
                value: s,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Corollary1Margins {
    pub name: String,
    /// `(p, E_p(C) − E_p(K))`.
    pub e_p: Vec<(f64, f64)>,
    /// `log(K) − log(C)`.
    pub log: f64,
}

impl Corollary1Margins {
    pub fn worst(&self) -> f64 {
        self.e_p.iter().map(|(_, m)| *m).fold(self.log, f64::min)
    }
}

/// Normalizes `body` and compares it with `C` in both functionals; each
/// exponent must lie in `(−n, 0)`.
pub fn corollary1_margins(
    body: &BodySpec,
    angle: &ContactAngle,
    exponents: &[f64],
    rule: &QuadratureRule,
) -> Result<Corollary1Margins> {
    let n = body.dim() as f64;
    if let Some(p) = exponents.iter().find(|p| !(**p > -n && **p < 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "exponent {p} is outside (-{n}, 0)"
        )));
    }
    let k = normalize(body, angle)?;
    let c = BodySpec::double_cap(body.dim(), *angle, 1.0)?;
    let e_p = exponents
        .iter()
        .map(|&p| Ok((p, e_p(&c, angle, p, rule)? - e_p(&k, angle, p, rule)?)))
        .collect::<Result<Vec<_>>>()?;
    let log = log_functional(&k, angle, rule)? - log_functional(&c, angle, rule)?;
    Ok(Corollary1Margins {
        name: body.name().to_string(),
        e_p,
        log,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::quadrature::{cap_rule, cap_rule_graded};

    fn ang(t: f64) -> ContactAngle {
        ContactAngle::new(t).unwrap()
    }

    #[test]
    fn cap_volume_closed_forms() {
        assert_abs_diff_eq!(vol_cap_hat(2, &ang(FRAC_PI_2)).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(
            vol_cap_hat(3, &ang(FRAC_PI_2)).unwrap(),
            2.0 * PI / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            vol_cap_hat(2, &ang(FRAC_PI_3)).unwrap(),
            FRAC_PI_3 - 3f64.sqrt() / 4.0,
            epsilon = 1e-15
        );
        assert!(vol_cap_hat(4, &ang(FRAC_PI_3)).is_err());
        assert!(vol_cap_hat(2, &ang(2.0)).is_err());
    }

    /// Hit-or-miss over the bounding box of `{x_n ≥ 0, |x + cosθ E_n| ≤ 1}`.
    fn membership_mc(n: usize, theta: f64, samples: usize, seed: u64) -> (f64, f64) {
        let c = theta.cos();
        let top = 1.0 - c;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0usize;
        for _ in 0..samples {
            let mut r2 = 0.0;
            for _ in 0..n - 1 {
                let v: f64 = rng.random_range(-1.0..1.0);
                r2 += v * v;
            }
            let t: f64 = rng.random_range(0.0..top);
            r2 += (t + c) * (t + c);
            if r2 <= 1.0 {
                hits += 1;
            }
        }
        let box_vol = 2f64.powi(n as i32 - 1) * top;
        let p = hits as f64 / samples as f64;
        (box_vol * p, box_vol * (p * (1.0 - p) / samples as f64).sqrt())
    }

    #[test]
    fn cap_volume_membership_oracle() {
        for n in [2, 3] {
            for (k, t) in [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2].into_iter().enumerate() {
                let (est, se) = membership_mc(n, t, 10_000_000, 11 + k as u64);
                let exact = vol_cap_hat(n, &ang(t)).unwrap();
                assert!((est - exact).abs() <= 3.0 * se, "n={n} θ={t}: {est} vs {exact} ± {se}");
            }
        }
    }

    #[test]
    fn ell_integral_is_cone_normalization() {
        for t in [FRAC_PI_6, FRAC_PI_3, 1.2, FRAC_PI_2] {
            let a = ang(t);
            let r2 = cap_rule(2, &a, 32).unwrap();
            let r3 = cap_rule(3, &a, 32).unwrap();
            let i2 = r2.integrate(|x| a.ell_at(x)).unwrap();
            let i3 = r3.integrate(|x| a.ell_at(x)).unwrap();
            assert_abs_diff_eq!(i2, 2.0 * vol_cap_hat(2, &a).unwrap(), epsilon = 1e-10);
            assert_abs_diff_eq!(i3, 3.0 * vol_cap_hat(3, &a).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn polar_volume_of_scaled_caps() {
        for n in [2, 3] {
            let a = ang(FRAC_PI_3);
            let rule = cap_rule(n, &a, 32).unwrap();
            let v = vol_cap_hat(n, &a).unwrap();
            for lambda in [0.5, 1.0, 3.0] {
                let cb = CapillaryBody::new(BodySpec::double_cap(n, a, lambda).unwrap(), a);
                let pv = polar_volume(&cb, &rule).unwrap();
                assert_abs_diff_eq!(pv, v / lambda.powi(n as i32), epsilon = 1e-9);
                let rep = volume_product(&cb, &rule).unwrap();
                assert_abs_diff_eq!(rep.product, v * v, epsilon = 1e-9);
                assert!(rep.margin.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn polar_volume_forms_agree() {
        let a = ang(FRAC_PI_4);
        for n in [2, 3] {
            let rule = cap_rule(n, &a, 24).unwrap();
            let half: Vec<f64> = (0..n).map(|i| 0.7 + 0.4 * i as f64).collect();
            for base in [
                BodySpec::ellipsoid(half.clone()).unwrap(),
                BodySpec::cuboid(half).unwrap(),
                BodySpec::lp_ball(n, 3.0, 1.2).unwrap(),
            ] {
                let cb = CapillaryBody::new(base, a);
                let (p, q) = (polar_volume(&cb, &rule).unwrap(), polar_volume_cone(&cb, &rule).unwrap());
                assert!((p - q).abs() <= 1e-12 * p.max(1.0), "{p} {q}");
            }
        }
    }

    /// Composite trapezoid in `φ` over the arc, independent of the Gauss rules.
    fn trapezoid_polar_area(theta: f64, h: impl Fn(f64, f64) -> f64, panels: usize) -> f64 {
        let c = theta.cos();
        let (lo, hi) = (FRAC_PI_2 - theta, FRAC_PI_2 + theta);
        let step = (hi - lo) / panels as f64;
        let f = |phi: f64| {
            let (s, co) = phi.sin_cos();
            let l = 1.0 - c * s;
            l.powi(3) / h(co, s).powi(2)
        };
        let mut acc = 0.5 * (f(lo) + f(hi));
        for k in 1..panels {
            acc += f(lo + k as f64 * step);
        }
        acc * step / 2.0
    }

    #[test]
    fn polar_volume_of_box_matches_trapezoid() {
        let a = ang(FRAC_PI_3);
        let cb = CapillaryBody::new(BodySpec::cuboid(vec![1.0, 1.0]).unwrap(), a);
        // panel break at φ = π/2 sits on the kink of h
        let rule = cap_rule_graded(&a, 16, 4).unwrap();
        let pv = polar_volume(&cb, &rule).unwrap();
        let oracle = trapezoid_polar_area(FRAC_PI_3, |x, y| x.abs() + y.abs(), 1_000_000);
        assert_abs_diff_eq!(pv, oracle, epsilon = 1e-7);
    }

    #[test]
    fn theorem1_equality_and_strict_cases() {
        let a = ang(FRAC_PI_3);
        for n in [2, 3] {
            let rule = cap_rule(n, &a, 32).unwrap();
            let v = vol_cap_hat(n, &a).unwrap();
            let cap = BodySpec::double_cap(n, a, 1.0).unwrap();
            assert_abs_diff_eq!(theorem1_lhs(&cap, &a, &rule).unwrap(), v * v, epsilon = 1e-9);
            let ball = BodySpec::ball(n, 2.0).unwrap();
            assert!(v * v - theorem1_lhs(&ball, &a, &rule).unwrap() > 1e-3);
        }
        let q = ang(FRAC_PI_4);
        let rule = cap_rule_graded(&q, 16, 4).unwrap();
        let bound = vol_cap_hat(2, &q).unwrap().powi(2);
        for a1 in [0.5, 1.0, 2.0] {
            for a2 in [0.5, 1.0, 2.0] {
                let b = BodySpec::cuboid(vec![a1, a2]).unwrap();
                assert!(bound - theorem1_lhs(&b, &q, &rule).unwrap() > 1e-4, "box {a1} {a2}");
            }
        }
    }

    #[test]
    fn equality_only_for_uniform_diagonal() {
        let a = ang(FRAC_PI_3);
        let rule = cap_rule(2, &a, 48).unwrap();
        let bound = vol_cap_hat(2, &a).unwrap().powi(2);
        let uniform = BodySpec::diag_scaled_cap(a, vec![1.7, 1.7]).unwrap();
        assert!((bound - theorem1_lhs(&uniform, &a, &rule).unwrap()).abs() <= 1e-8);
        let skew = BodySpec::diag_scaled_cap(a, vec![1.0, 1.3]).unwrap();
        assert!(bound - theorem1_lhs(&skew, &a, &rule).unwrap() > 1e-8);
    }

    #[test]
    fn product_scale_invariance() {
        let a = ang(FRAC_PI_3);
        let rule = cap_rule(2, &a, 64).unwrap();
        let base = BodySpec::ellipsoid(vec![1.0, 0.6]).unwrap();
        let p1 = volume_product(&CapillaryBody::new(base.clone(), a), &rule).unwrap();
        assert!(p1.margin > 0.0);
        for lambda in [0.5, 3.0] {
            let cb = CapillaryBody::new(base.scaled(lambda).unwrap(), a);
            let p = volume_product(&cb, &rule).unwrap();
            assert!((p.product - p1.product).abs() <= 1e-8);
        }
    }

    #[test]
    fn corollary1_on_cap_and_box() {
        let a = ang(FRAC_PI_3);
        let rule = cap_rule(2, &a, 64).unwrap();
        let c = BodySpec::double_cap(2, a, 1.0).unwrap();
        for p in [-1.5, -1.0, -0.5, 0.5, 2.0] {
            assert_abs_diff_eq!(
                e_p(&c, &a, p, &rule).unwrap(),
                2.0 * vol_cap_hat(2, &a).unwrap(),
                epsilon = 1e-12
            );
        }
        assert!(e_p(&c, &a, 0.0, &rule).is_err());
        let graded = cap_rule_graded(&a, 16, 4).unwrap();
        let bx = BodySpec::cuboid(vec![1.0, 0.5]).unwrap();
        let nb = normalize(&bx, &a).unwrap();
        assert_abs_diff_eq!(nb.volume(), c.volume(), epsilon = 1e-10);
        let m = corollary1_margins(&bx, &a, &[-1.0], &graded).unwrap();
        assert!(m.worst() > 1e-6, "{m:?}");
        assert!(corollary1_margins(&bx, &a, &[-2.5], &graded).is_err());
        assert!(corollary1_margins(&bx, &a, &[0.5], &graded).is_err());
    }

    #[test]
    fn nonpositive_support_is_reported() {
        let a = ang(FRAC_PI_3);
        let rule = cap_rule(2, &a, 8).unwrap();
        let err = ell_power_integral(&rule, |x| x[0]).unwrap_err();
        // first node past φ = π/2
        assert!(matches!(err, Error::NonPositiveSupport { index: 4, .. }), "{err:?}");
    }
}
