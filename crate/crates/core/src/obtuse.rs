//! Two planar families with an obtuse contact angle whose volume product is
//! unbounded.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::cap::{CapPoint, ContactAngle};
use crate::error::{Error, Result};
use crate::functionals::csv_field;
use crate::quadrature::{cap_rule_graded_split, gauss_legendre_on, QuadratureRule};

/// Panels per side of the graded rule used for the polar integrals.
pub const GRADED_NODES: usize = 32;
pub const GRADED_LEVELS: usize = 40;

/// `K_λ`: the lower part of `(1/λ)Ĉ_θ`, the rectangle `|x| ≤ 1/λ`,
/// `−cosθ/λ ≤ y ≤ λ`, and the disk `(1/λ)B² + λE₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example1Body {
    lambda: f64,
    angle: ContactAngle,
}

impl Example1Body {
    pub fn new(lambda: f64, angle: ContactAngle) -> Result<Self> {
        angle.require_obtuse()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        // the rectangle must reach above the centre of the lower disk
        if lambda * lambda < -angle.cos() {
            return Err(Error::InvalidParameter(format!(
                "lambda^2 = {} is below -cos(theta) = {}",
                lambda * lambda,
                -angle.cos()
            )));
        }
        Ok(Self { lambda, angle })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn angle(&self) -> &ContactAngle {
        &self.angle
    }

    /// Support of each piece: top disk, rectangle, lower arc. The arc term is
    /// only attained for `y ∈ [cosθ, 0]`; elsewhere it is `None`.
    pub fn piece_supports(&self, y: &[f64]) -> [Option<f64>; 3] {
        let (l, c) = (self.lambda, self.angle.cos());
        let top = l * y[1] + norm2(y) / l;
        let rect = y[0].abs() / l + (l * y[1]).max(-c * y[1] / l);
        // lower disk: centre (0, −c/λ), radius 1/λ, kept for 0 ≤ height ≤ −c/λ
        let r = norm2(y);
        let arc = if r > 0.0 && y[1] <= 0.0 && y[1] >= c * r {
            Some((-c * y[1] + r) / l)
        } else {
            None
        };
        [Some(top), Some(rect), arc]
    }

    /// Support function `h_{K_λ}` in any direction.
    pub fn support(&self, y: &[f64]) -> f64 {
        let [top, rect, arc] = self.piece_supports(y);
        let mut h = top.unwrap().max(rect.unwrap());
        if let Some(a) = arc {
            h = h.max(a);
        }
        // chord endpoints (±sinθ/λ, 0) of the lower disk
        h.max(self.angle.sin() * y[0].abs() / self.lambda)
    }

    /// Capillary support `s_{Σ_λ}(ζ) = h_{K_λ}(x)`.
    pub fn capillary_support(&self, p: &CapPoint) -> f64 {
        self.support(p.x())
    }

    /// Area of `K_λ` from its three pieces: a circular zone, a rectangle and a
    /// half disk.
    pub fn area(&self) -> f64 {
        let (l, c, s) = (self.lambda, self.angle.cos(), self.angle.sin());
        let zone = ((-c).asin() - c * s) / (l * l);
        let rect = 2.0 * (1.0 + c / (l * l));
        let top = PI / (2.0 * l * l);
        zone + rect + top
    }

    /// Volume of `λK_λ` rotated about the vertical axis: a spherical zone, a
    /// cylinder and a hemisphere.
    pub fn rotated_volume_scaled(&self) -> f64 {
        let (l, c) = (self.lambda, self.angle.cos());
        let d = -c;
        let zone = PI * (d - d.powi(3) / 3.0);
        let cylinder = PI * (l * l + c);
        let top = 2.0 * PI / 3.0;
        zone + cylinder + top
    }

    /// `D_θ = C_θ ∩ {ζ_2 ≤ −cosθ/2}`, i.e. `x_2 ≤ cosθ/2`.
    pub fn in_d_theta(&self, x: &[f64]) -> bool {
        x[1] <= 0.5 * self.angle.cos()
    }

    /// Arc angles where the active piece of the support function changes,
    /// together with `φ = 0, π` where the rectangle's top and bottom swap.
    pub fn kinks(&self) -> Vec<f64> {
        let t = self.angle.theta();
        let (lo, hi) = (FRAC_PI_2 - t, FRAC_PI_2 + t);
        let active = |phi: f64| {
            let y = [phi.cos(), phi.sin()];
            let pieces = self.piece_supports(&y);
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, v) in pieces.iter().enumerate() {
                if let Some(v) = v {
                    if *v > best.1 {
                        best = (i, *v);
                    }
                }
            }
            best.0
        };
        let mut out = vec![0.0, FRAC_PI_2, PI];
        let m = 4000;
        let mut prev = (lo, active(lo));
        for k in 1..=m {
            let phi = lo + (hi - lo) * k as f64 / m as f64;
            let a = active(phi);
            if a != prev.1 {
                let (mut x0, mut x1) = (prev.0, phi);
                for _ in 0..80 {
                    let mid = 0.5 * (x0 + x1);
                    if active(mid) == prev.1 {
                        x0 = mid;
                    } else {
                        x1 = mid;
                    }
                }
                out.push(0.5 * (x0 + x1));
            }
            prev = (phi, a);
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// `∫ ℓ³ / s² dσ`, restricted to `D_θ` when `d_only`.
    pub fn polar_integral(&self, rule: &QuadratureRule, d_only: bool) -> Result<f64> {
        let mut acc = 0.0;
        for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            if d_only && !self.in_d_theta(x) {
                continue;
            }
            let s = self.support(x);
            if !(s > 0.0) {
                return Err(Error::NonPositiveSupport {
                    index: i,
                    node: x.clone(),
                    value: s,
                });
            }
            let l = self.angle.ell_at(x);
            acc += w * l.powi(3) / (s * s);
        }
        Ok(acc)
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        cap_rule_graded_split(&self.angle, GRADED_NODES, GRADED_LEVELS, &self.kinks())
    }
}

fn norm2(y: &[f64]) -> f64 {
    y[0].hypot(y[1])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyRow {
    pub param: f64,
    pub vol_hat: f64,
    pub vol_polar: f64,
    pub product: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyTable {
    pub name: String,
    pub theta: f64,
    pub rows: Vec<FamilyRow>,
    pub increasing: bool,
    /// `product(last) / product(first)`.
    pub ratio: f64,
    /// Least-squares slope of `log product` against `log param` over the
    /// rows within one decade of the largest parameter.
    pub slope: f64,
}

impl FamilyTable {
    pub const CSV_HEADER: &'static str = "param,vol_hat,vol_polar,product";

    fn build(name: &str, theta: f64, rows: Vec<FamilyRow>) -> Self {
        let increasing = rows.windows(2).all(|w| w[1].product > w[0].product);
        let ratio = match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => b.product / a.product,
            _ => f64::NAN,
        };
        let top = rows.iter().map(|r| r.param).fold(f64::NEG_INFINITY, f64::max);
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.param >= top / 10.0 - 1e-12)
            .map(|r| (r.param.ln(), r.product.ln()))
            .unzip();
        Self {
            name: name.to_string(),
            theta,
            rows,
            increasing,
            ratio,
            slope: fitted_slope(&xs, &ys),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e}\n",
                csv_field(&format!("{}", r.param)),
                r.vol_hat,
                r.vol_polar,
                r.product
            ));
        }
        out
    }
}

pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// `vol(Σ̂_λ)`, `vol(Σ̂*_λ) = ½∫ℓ³/s²` and their product along `lambdas`.
pub fn example1_product(lambdas: &[f64], angle: &ContactAngle) -> Result<FamilyTable> {
    angle.require_obtuse()?;
    let rows = lambdas
        .iter()
        .map(|&l| {
            let e = Example1Body::new(l, *angle)?;
            let vol_hat = e.area();
            let vol_polar = 0.5 * e.polar_integral(&e.rule()?, false)?;
            Ok(FamilyRow {
                param: l,
                vol_hat,
                vol_polar,
                product: vol_hat * vol_polar,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FamilyTable::build("example1", angle.theta(), rows))
}

/// Ellipse `x²/a² + (y − c)²/b² ≤ 1` cut by `y ≥ 0`, with `a = 1/b` and
/// `c = ηb`, `η = b²/√(b⁴ + tan²θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Example2Body {
    pub b: f64,
    pub theta: f64,
    pub a: f64,
    pub eta: f64,
    pub c: f64,
    /// `b² − c²`, kept separately to avoid cancellation.
    b2_minus_c2: f64,
}

impl Example2Body {
    /// `b = 1` is admitted: it is the circle with `c = |cosθ|`.
    pub fn new(b: f64, angle: &ContactAngle) -> Result<Self> {
        angle.require_obtuse()?;
        if !(b >= 1.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("b must be at least 1, got {b}")));
        }
        let tan2 = (angle.sin() / angle.cos()).powi(2);
        let root = (b.powi(4) + tan2).sqrt();
        let eta = b * b / root;
        let a = 1.0 / b;
        let c = eta * b;
        if !(b > c && c > 0.0) {
            return Err(Error::InvalidParameter(format!("need b > c > 0, got b = {b}, c = {c}")));
        }
        let e = Self {
            b,
            theta: angle.theta(),
            a,
            eta,
            c,
            b2_minus_c2: b * b * tan2 / (b.powi(4) + tan2),
        };
        let recomputed = e.contact_cos();
        if (recomputed - angle.cos()).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "contact angle mismatch: cos = {recomputed}, expected {}",
                angle.cos()
            )));
        }
        Ok(e)
    }

    /// `−ac / √(b⁴ + (a² − b²)c²)`.
    pub fn contact_cos(&self) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        -a * c / (b.powi(4) + (a * a - b * b) * c * c).sqrt()
    }

    /// `h(ψ) = c sinψ + √(a²cos²ψ + b²sin²ψ)` for `ψ ∈ [π/2 − θ, π/2 + θ]`.
    pub fn support(&self, psi_dir: f64) -> Result<f64> {
        let (lo, hi) = (FRAC_PI_2 - self.theta, FRAC_PI_2 + self.theta);
        if !(psi_dir >= lo - 1e-12 && psi_dir <= hi + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "direction angle {psi_dir} outside [{lo}, {hi}]"
            )));
        }
        let (s, co) = psi_dir.sin_cos();
        Ok(self.support_xy(co, s))
    }

    /// Same formula at a unit vector `(cosψ, sinψ)`.
    pub fn support_xy(&self, co: f64, s: f64) -> f64 {
        let q = self.a * self.a * co * co + self.b * self.b * s * s;
        let root = q.sqrt();
        if self.c * s >= 0.0 {
            self.c * s + root
        } else {
            // (q − c²s²) / (√q − cs), no cancellation for s < 0
            (self.a * self.a * co * co + self.b2_minus_c2 * s * s) / (root - self.c * s)
        }
    }

    /// Parameter range `[−arcsin(c/b), π + arcsin(c/b)]` of the upper arc.
    pub fn t_range(&self) -> (f64, f64) {
        let t0 = (self.c / self.b).asin();
        (-t0, PI + t0)
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        [self.a * t.cos(), self.b * t.sin() + self.c]
    }

    /// Area of the cut ellipse: Gauss–Legendre in `t` of `½(x y' − y x')`;
    /// the closing chord on `y = 0` contributes nothing.
    pub fn area(&self) -> f64 {
        let (t0, t1) = self.t_range();
        let (ts, ws) = gauss_legendre_on(64, t0, t1);
        ts.iter()
            .zip(&ws)
            .map(|(t, w)| {
                let (s, c) = t.sin_cos();
                let (x, y) = (self.a * c, self.b * s + self.c);
                let (dx, dy) = (-self.a * s, self.b * c);
                w * 0.5 * (x * dy - y * dx)
            })
            .sum()
    }

    /// `∫ ℓ³ / h² dσ` over the cap.
    pub fn polar_integral(&self, rule: &QuadratureRule) -> Result<f64> {
        let cos = self.theta.cos();
        let mut acc = 0.0;
        for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let h = self.support_xy(x[0], x[1]);
            if !(h > 0.0) {
                return Err(Error::NonPositiveSupport {
                    index: i,
                    node: x.clone(),
                    value: h,
                });
            }
            let l = 1.0 - cos * x[1];
            acc += w * l.powi(3) / (h * h);
        }
        Ok(acc)
    }

    /// The displayed upper bound for `h` on `(φ, φ + δ)` with `φ = π/2 − θ`,
    /// `δ = b⁻³`.
    pub fn chain_bound(&self) -> f64 {
        let (b, t) = (self.b, self.theta);
        let (c, s) = (t.cos(), t.sin());
        let d = b.powi(-3);
        let tan = s / c;
        (b.powi(3) * (c * (d.cos() - 1.0) + s * d.sin()) - s * tan / b) / (b.powi(4) + tan * tan).sqrt()
    }
}

/// `g(α) = b⁻²cos²α + b²sin²α` and its derivative `(b² − b⁻²) sin 2α`.
pub fn example2_g(b: f64, alpha: f64) -> (f64, f64) {
    let (s, c) = alpha.sin_cos();
    (
        c * c / (b * b) + b * b * s * s,
        (b * b - 1.0 / (b * b)) * (2.0 * alpha).sin(),
    )
}

pub fn example2_product(bs: &[f64], angle: &ContactAngle) -> Result<FamilyTable> {
    angle.require_obtuse()?;
    let rule = cap_rule_graded_split(angle, GRADED_NODES, GRADED_LEVELS, &[])?;
    let rows = bs
        .iter()
        .map(|&b| {
            let e = Example2Body::new(b, angle)?;
            let vol_hat = e.area();
            let vol_polar = 0.5 * e.polar_integral(&rule)?;
            Ok(FamilyRow {
                param: b,
                vol_hat,
                vol_polar,
                product: vol_hat * vol_polar,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FamilyTable::build("example2", angle.theta(), rows))
}
