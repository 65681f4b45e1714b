//! Closed-form geometry of the capillary cap.
//!
//! The cap `C_θ = {|x + cosθ E_n| = 1, x_n ≥ 0}` is carried through its sphere
//! representative `x ∈ S^{n-1}_θ = {x ∈ S^{n-1} : x_n ≥ cosθ}`. Reflecting the
//! enclosed region `Ĉ_θ` across `x_n = 0` gives the doubled body `C`, whose
//! support function `h_C`, gauge `p_C` and the potentials `V = ½p_C²`,
//! `V* = ½h_C²` live on [`DoubledCap`].

use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on cap membership of a point.
pub const CAP_POINT_TOL: f64 = 1e-12;
/// Relative half-width of the band around the critical cone treated as ambiguous.
pub const CONE_TOL: f64 = 1e-12;
/// Allowed slack when checking that the forward map lands in its range cone.
pub const RANGE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Acute,
    Right,
    Obtuse,
}

/// Contact angle `θ ∈ (0, π)`.
///
/// Angles within `1e-12` of `π/2` are snapped to the right regime with
/// `cosθ = 0` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ContactAngle {
    theta: f64,
    cos: f64,
    sin: f64,
}

impl ContactAngle {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::AngleOutOfRange(theta));
        }
        if (theta - FRAC_PI_2).abs() <= 1e-12 {
            return Ok(Self {
                theta,
                cos: 0.0,
                sin: 1.0,
            });
        }
        Ok(Self {
            theta,
            cos: theta.cos(),
            sin: theta.sin(),
        })
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn cos(&self) -> f64 {
        self.cos
    }

    #[inline]
    pub fn sin(&self) -> f64 {
        self.sin
    }

    pub fn regime(&self) -> Regime {
        if self.cos > 0.0 {
            Regime::Acute
        } else if self.cos == 0.0 {
            Regime::Right
        } else {
            Regime::Obtuse
        }
    }

    /// Strictly acute: the regime in which the volume-product bound holds.
    pub fn require_acute(&self) -> Result<()> {
        match self.regime() {
            Regime::Acute => Ok(()),
            got => Err(Error::Regime {
                required: "acute (0 < theta < pi/2)",
                got,
                theta: self.theta,
            }),
        }
    }

    /// Acute or right; the closed forms for `h_C` and `p_C` stay valid at `π/2`.
    pub fn require_non_obtuse(&self) -> Result<()> {
        match self.regime() {
            Regime::Obtuse => Err(Error::Regime {
                required: "acute or right (0 < theta <= pi/2)",
                got: Regime::Obtuse,
                theta: self.theta,
            }),
            _ => Ok(()),
        }
    }

    pub fn require_obtuse(&self) -> Result<()> {
        match self.regime() {
            Regime::Obtuse => Ok(()),
            got => Err(Error::Regime {
                required: "obtuse (pi/2 < theta < pi)",
                got,
                theta: self.theta,
            }),
        }
    }

    /// `ℓ = 1 − cosθ·x_n` evaluated at a sphere representative, any regime.
    #[inline]
    pub fn ell_at(&self, x: &[f64]) -> f64 {
        1.0 - self.cos * x[x.len() - 1]
    }
}

impl TryFrom<f64> for ContactAngle {
    type Error = Error;

    fn try_from(theta: f64) -> Result<Self> {
        Self::new(theta)
    }
}

impl From<ContactAngle> for f64 {
    fn from(a: ContactAngle) -> f64 {
        a.theta
    }
}

/// A point of `C_θ`, stored both as `ζ` and as `x = ζ + cosθ E_n ∈ S^{n-1}_θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CapPoint {
    x: Vec<f64>,
    zeta: Vec<f64>,
}

impl CapPoint {
    pub fn new(x: Vec<f64>, angle: &ContactAngle) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(Error::UnsupportedDimension(n, "n >= 2"));
        }
        let norm = norm(&x);
        if (norm - 1.0).abs() > CAP_POINT_TOL {
            return Err(Error::NotOnCap(format!("|x| = {norm}")));
        }
        if x[n - 1] < angle.cos() - CAP_POINT_TOL {
            return Err(Error::NotOnCap(format!(
                "x_n = {} below cos(theta) = {}",
                x[n - 1],
                angle.cos()
            )));
        }
        let mut zeta = x.clone();
        zeta[n - 1] -= angle.cos();
        Ok(Self { x, zeta })
    }

    pub fn from_zeta(zeta: Vec<f64>, angle: &ContactAngle) -> Result<Self> {
        let mut x = zeta;
        let n = x.len();
        if n < 2 {
            return Err(Error::UnsupportedDimension(n, "n >= 2"));
        }
        x[n - 1] += angle.cos();
        Self::new(x, angle)
    }

    /// Planar cap point `x = (cos φ, sin φ)`.
    pub fn from_arc(phi: f64, angle: &ContactAngle) -> Result<Self> {
        Self::new(vec![phi.cos(), phi.sin()], angle)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }
}

/// A point of the open positive orthant `(0, ∞)^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthantPoint(Vec<f64>);

impl OrthantPoint {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveCoordinate { index, value });
        }
        Ok(Self(y))
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[inline]
pub(crate) fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(|y'|, |y_n|)`.
#[inline]
fn split(y: &[f64]) -> (f64, f64) {
    let n = y.len();
    (norm(&y[..n - 1]), y[n - 1].abs())
}

/// Gauge `p_C(y) = (cosθ|y_n| + √(y_n² + sin²θ|y'|²)) / sin²θ`.
///
/// Defined for every regime; for obtuse angles this is the formula continued
/// past `π/2`, which is what the convexity statement about `V(√x)` refers to.
pub fn gauge_c(y: &[f64], angle: &ContactAngle) -> f64 {
    let (yp, yn) = split(y);
    let s2 = angle.sin() * angle.sin();
    (angle.cos() * yn + (yn * yn + s2 * yp * yp).sqrt()) / s2
}

/// `V = ½ p_C²`, any regime.
pub fn potential_v(y: &[f64], angle: &ContactAngle) -> f64 {
    let p = gauge_c(y, angle);
    0.5 * p * p
}

/// Hessian of `v(s, t) = V(√x)` with `s = x_1 + … + x_{n-1}`, `t = x_n`.
///
/// Rank one and negative semidefinite for acute angles, positive
/// semidefinite for obtuse ones.
pub fn hess_v_2d(s: f64, t: f64, angle: &ContactAngle) -> Result<Matrix2<f64>> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveCoordinate { index: 0, value: s });
    }
    if !(t > 0.0) {
        return Err(Error::NonPositiveCoordinate { index: 1, value: t });
    }
    let q = t * t + s * t * angle.sin() * angle.sin();
    let k = -angle.cos() / (4.0 * q * q.sqrt());
    Ok(Matrix2::new(t * t, -s * t, -s * t, s * s) * k)
}

/// The reduced function `v(s, t) = V(√x)` written out in `(s, t)`.
pub fn v_reduced(s: f64, t: f64, angle: &ContactAngle) -> f64 {
    let (c, sn) = (angle.cos(), angle.sin());
    let s2 = sn * sn;
    ((1.0 + c * c) * t + s2 * s + 2.0 * c * (t * t + s * t * s2).sqrt()) / (2.0 * s2 * s2)
}

/// The doubled cap `C = Ĉ_θ ∪ R(Ĉ_θ)` for a non-obtuse contact angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubledCap {
    angle: ContactAngle,
}

impl DoubledCap {
    pub fn new(angle: ContactAngle) -> Result<Self> {
        angle.require_non_obtuse()?;
        Ok(Self { angle })
    }

    #[inline]
    pub fn angle(&self) -> &ContactAngle {
        &self.angle
    }

    /// Capillary support function of `C_θ`: `ℓ = 1 − cosθ ⟨x, E_n⟩`.
    #[inline]
    pub fn ell(&self, p: &CapPoint) -> f64 {
        self.angle.ell_at(p.x())
    }

    /// Support function `h_C`.
    pub fn support(&self, y: &[f64]) -> f64 {
        let (yp, yn) = split(y);
        let r = (yp * yp + yn * yn).sqrt();
        if yn <= r * self.angle.cos() {
            yp * self.angle.sin()
        } else {
            r - yn * self.angle.cos()
        }
    }

    /// Gauge `p_C`.
    #[inline]
    pub fn gauge(&self, y: &[f64]) -> f64 {
        gauge_c(y, &self.angle)
    }

    #[inline]
    pub fn v(&self, y: &[f64]) -> f64 {
        potential_v(y, &self.angle)
    }

    #[inline]
    pub fn v_star(&self, y: &[f64]) -> f64 {
        let h = self.support(y);
        0.5 * h * h
    }

    /// `DV` on the orthant, assembled from `r = √(x_n² + |x'|²sin²θ)` and the
    /// angle `φ` with `cosφ = x_n / r`, `sinφ = sinθ|x'| / r`.
    pub fn grad_v(&self, x: &OrthantPoint) -> Vec<f64> {
        self.grad_v_signed(x.as_slice())
    }

    /// `DV` at any nonzero point; signs of the coordinates carry through.
    pub(crate) fn grad_v_signed(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let (c, s) = (self.angle.cos(), self.angle.sin());
        let s2 = s * s;
        let (xp, xn) = split(x);
        let r = (xn * xn + xp * xp * s2).sqrt();
        if r == 0.0 {
            return vec![0.0; n];
        }
        let cos_phi = xn / r;
        let lift = 1.0 + c * cos_phi;
        let mut y: Vec<f64> = x[..n - 1].iter().map(|&xi| lift / s2 * xi).collect();
        let yn = r / (s2 * s2) * lift * (c + cos_phi);
        y.push(yn.copysign(x[n - 1]));
        y
    }

    /// `DV*`: `sin²θ (y', 0)` on the cylinder region `|y_n| ≤ |y|cosθ`,
    /// `h_C D h_C` on the cap region.
    pub fn grad_v_star(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let (yp, yn) = split(y);
        let r = (yp * yp + yn * yn).sqrt();
        if r == 0.0 {
            return vec![0.0; n];
        }
        let (c, s) = (self.angle.cos(), self.angle.sin());
        if yn <= r * c {
            let mut g: Vec<f64> = y[..n - 1].iter().map(|v| s * s * v).collect();
            g.push(0.0);
            g
        } else {
            let h = r - yn * c;
            let mut g: Vec<f64> = y.iter().map(|v| h * v / r).collect();
            g[n - 1] -= h * c * y[n - 1].signum();
            g
        }
    }

    /// `det D²V*`: `0` on the cylinder region and `(1 − (|y_n|/|y|)cosθ)^{n+1}` on
    /// the cap region. Points on the critical cone are rejected.
    pub fn det_hess_v_star(&self, y: &[f64]) -> Result<f64> {
        let n = y.len();
        let (yp, yn) = split(y);
        let r = (yp * yp + yn * yn).sqrt();
        if r == 0.0 {
            return Err(Error::InvalidParameter("det D²V* at the origin".into()));
        }
        let gap = yn / r - self.angle.cos();
        if gap.abs() <= CONE_TOL {
            return Err(Error::BranchAmbiguity(y.to_vec()));
        }
        if gap < 0.0 {
            Ok(0.0)
        } else {
            Ok((1.0 - yn / r * self.angle.cos()).powi(n as i32 + 1))
        }
    }

    /// `y_n − |y| cosθ`, positive on the cone of `B = {y ∈ (0,∞)^n : y_n > |y| cosθ}`.
    pub fn range_gap(&self, y: &[f64]) -> f64 {
        y[y.len() - 1] - norm(y) * self.angle.cos()
    }

    /// The gradient map `DV : (0,∞)^n → B`.
    pub fn forward_map(&self, x: &OrthantPoint) -> Result<OrthantPoint> {
        let y = self.grad_v(x);
        let gap = self.range_gap(&y);
        if gap < -RANGE_TOL * norm(&y).max(1.0) {
            return Err(Error::RangeViolation(gap));
        }
        OrthantPoint::new(y).map_err(|e| match e {
            Error::NonPositiveCoordinate { value, .. } => Error::RangeViolation(value),
            e => e,
        })
    }
}

/// `f(φ) = sinθ sinφ / (cosθ + cosφ)`, the ratio `|y'|/y_n` along the image of `DV`.
pub fn range_profile(phi: f64, angle: &ContactAngle) -> f64 {
    angle.sin() * phi.sin() / (angle.cos() + phi.cos())
}
