//! Unconditional convex bodies: support function, gauge, volume, and the
//! capillary support function obtained by restricting to cap directions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::function::gamma::gamma;

use crate::cap::{dot, gauge_c, norm, CapPoint, ContactAngle, DoubledCap};
use crate::error::{Error, Result};
use crate::functionals::vol_cap_hat;
use crate::quadrature::{mirror, orthant_mesh, OrthantMesh};

/// Radial function sampled on an [`OrthantMesh`] and mirrored into every orthant.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialBody {
    mesh: OrthantMesh,
    radii: Vec<f64>,
}

impl RadialBody {
    pub fn new(n: usize, resolution: usize, radii: Vec<f64>) -> Result<Self> {
        let mesh = orthant_mesh(n, resolution)?;
        if radii.len() != mesh.dirs.len() {
            return Err(Error::BodySpec(format!(
                "custom_radial with resolution {resolution} needs {} radii, got {}",
                mesh.dirs.len(),
                radii.len()
            )));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::BodySpec(format!("radial value {r} is not positive")));
        }
        Ok(Self { mesh, radii })
    }

    /// Samples `ρ(u) = 1 / p(u)` from any radial profile.
    pub fn sample<F: Fn(&[f64]) -> f64>(n: usize, resolution: usize, radial: F) -> Result<Self> {
        let mesh = orthant_mesh(n, resolution)?;
        let radii = mesh.dirs.iter().map(|u| radial(u)).collect();
        Self::new(n, resolution, radii)
    }

    pub fn mesh(&self) -> &OrthantMesh {
        &self.mesh
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    fn support(&self, y: &[f64]) -> f64 {
        let a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
        // over all mirrored copies the maximum is attained on the orthant of |y|
        self.mesh
            .dirs
            .iter()
            .zip(&self.radii)
            .map(|(u, r)| r * dot(u, &a))
            .fold(0.0, f64::max)
    }

    fn radius(&self, u: &[f64]) -> f64 {
        let a: Vec<f64> = u.iter().map(|v| v.abs()).collect();
        match self.mesh.n {
            2 => {
                let m = self.mesh.resolution;
                let step = std::f64::consts::FRAC_PI_2 / m as f64;
                let phi = a[1].atan2(a[0]);
                let pos = phi / step - 0.5;
                // neighbours across φ = 0 and φ = π/2 are reflections
                let k = pos.floor();
                let (i, j) = (k as isize, k as isize + 1);
                let idx = |t: isize| t.clamp(0, m as isize - 1) as usize;
                let angle = |t: isize| (t as f64 + 0.5) * step;
                let p = point2(self.radii[idx(i)], angle(i));
                let q = point2(self.radii[idx(j)], angle(j));
                let d = [q[0] - p[0], q[1] - p[1]];
                let u = [phi.cos(), phi.sin()];
                (p[0] * d[1] - p[1] * d[0]) / (u[0] * d[1] - u[1] * d[0])
            }
            _ => self.radius_bilinear(&a),
        }
    }

    fn radius_bilinear(&self, a: &[f64]) -> f64 {
        let m = self.mesh.resolution;
        let alpha_nodes: Vec<f64> = (0..m)
            .map(|i| self.mesh.dirs[i * m][2].clamp(-1.0, 1.0).acos())
            .collect();
        let step = std::f64::consts::FRAC_PI_2 / m as f64;
        let alpha = (a[2] / norm(a)).clamp(-1.0, 1.0).acos();
        let beta = a[1].atan2(a[0]);
        let (i0, i1, ta) = bracket(&alpha_nodes, alpha);
        let pos = (beta / step - 0.5).clamp(0.0, (m - 1) as f64);
        let j0 = pos.floor() as usize;
        let j1 = (j0 + 1).min(m - 1);
        let tb = pos - j0 as f64;
        let r = |i: usize, j: usize| self.radii[i * m + j];
        let lo = r(i0, j0) * (1.0 - tb) + r(i0, j1) * tb;
        let hi = r(i1, j0) * (1.0 - tb) + r(i1, j1) * tb;
        lo * (1.0 - ta) + hi * ta
    }

    fn volume(&self) -> f64 {
        let n = self.mesh.n;
        let orthant: f64 = self
            .mesh
            .weights
            .iter()
            .zip(&self.radii)
            .map(|(w, r)| w * r.powi(n as i32))
            .sum();
        (1u64 << n) as f64 * orthant / n as f64
    }
}

fn point2(r: f64, phi: f64) -> [f64; 2] {
    [r * phi.cos(), r * phi.sin()]
}

/// Index pair and weight for linear interpolation in an ascending grid, clamped.
fn bracket(nodes: &[f64], x: f64) -> (usize, usize, f64) {
    let last = nodes.len() - 1;
    if x <= nodes[0] {
        return (0, 0, 0.0);
    }
    if x >= nodes[last] {
        return (last, last, 0.0);
    }
    let k = nodes.partition_point(|v| *v <= x) - 1;
    (k, k + 1, (x - nodes[k]) / (nodes[k + 1] - nodes[k]))
}

#[derive(Clone, Debug, PartialEq)]
pub enum BodyKind {
    /// `λ·C`, the doubled cap scaled by `scale`.
    DoubleCap { angle: ContactAngle, scale: f64 },
    Ball { radius: f64 },
    Box { half_widths: Vec<f64> },
    Ellipsoid { semi_axes: Vec<f64> },
    /// `scale · B_p^n`; `p = ∞` is the cube.
    LpBall { p: f64, scale: f64 },
    /// `{Σ |x_i| / b_i ≤ 1}`, the polar of a box.
    CrossPolytope { half_diagonals: Vec<f64> },
    /// `diag(a)·C`.
    DiagScaledCap { angle: ContactAngle, diag: Vec<f64> },
    CustomRadial(RadialBody),
}

impl BodyKind {
    pub fn tag(&self) -> &'static str {
        match self {
            BodyKind::DoubleCap { .. } => "double_cap",
            BodyKind::Ball { .. } => "ball",
            BodyKind::Box { .. } => "box",
            BodyKind::Ellipsoid { .. } => "ellipsoid",
            BodyKind::LpBall { .. } => "lp_ball",
            BodyKind::CrossPolytope { .. } => "cross_polytope",
            BodyKind::DiagScaledCap { .. } => "diag_scaled_cap",
            BodyKind::CustomRadial(_) => "custom_radial",
        }
    }
}

/// An unconditional convex body in `ℝ^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BodySpec {
    name: String,
    dim: usize,
    kind: BodyKind,
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::BodySpec(format!("{what} must be positive, got {v}")))
    }
}

fn positive_vec(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::BodySpec(format!(
            "{what} has {} entries, dimension is {n}",
            v.len()
        )));
    }
    v.iter().try_for_each(|x| positive(*x, what))
}

fn cap_dim(n: usize) -> Result<()> {
    if matches!(n, 2 | 3) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n, "n in {2, 3} for cap bodies"))
    }
}

impl BodySpec {
    pub fn new(name: impl Into<String>, dim: usize, kind: BodyKind) -> Result<Self> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension(dim, "n >= 2"));
        }
        match &kind {
            BodyKind::DoubleCap { angle, scale } => {
                angle.require_non_obtuse()?;
                cap_dim(dim)?;
                positive(*scale, "scale")?;
            }
            BodyKind::Ball { radius } => positive(*radius, "radius")?,
            BodyKind::Box { half_widths } => positive_vec(half_widths, dim, "half_widths")?,
            BodyKind::Ellipsoid { semi_axes } => positive_vec(semi_axes, dim, "semi_axes")?,
            BodyKind::LpBall { p, scale } => {
                if !(*p >= 1.0) {
                    return Err(Error::BodySpec(format!("lp_ball needs p >= 1, got {p}")));
                }
                positive(*scale, "scale")?;
            }
            BodyKind::CrossPolytope { half_diagonals } => {
                positive_vec(half_diagonals, dim, "half_diagonals")?
            }
            BodyKind::DiagScaledCap { angle, diag } => {
                angle.require_non_obtuse()?;
                cap_dim(dim)?;
                positive_vec(diag, dim, "diag")?;
            }
            BodyKind::CustomRadial(r) => {
                if r.mesh.n != dim {
                    return Err(Error::BodySpec(format!(
                        "radial mesh is {}-dimensional, body is {dim}",
                        r.mesh.n
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            kind,
        })
    }

    pub fn double_cap(dim: usize, angle: ContactAngle, scale: f64) -> Result<Self> {
        Self::new(
            format!("double_cap(theta={:.6},scale={scale})", angle.theta()),
            dim,
            BodyKind::DoubleCap { angle, scale },
        )
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(format!("ball(r={radius})"), dim, BodyKind::Ball { radius })
    }

    pub fn cuboid(half_widths: Vec<f64>) -> Result<Self> {
        Self::new(
            format!("box{half_widths:?}"),
            half_widths.len(),
            BodyKind::Box { half_widths },
        )
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        Self::new(
            format!("ellipsoid{semi_axes:?}"),
            semi_axes.len(),
            BodyKind::Ellipsoid { semi_axes },
        )
    }

    pub fn lp_ball(dim: usize, p: f64, scale: f64) -> Result<Self> {
        Self::new(
            format!("lp_ball(p={p},scale={scale})"),
            dim,
            BodyKind::LpBall { p, scale },
        )
    }

    pub fn cross_polytope(half_diagonals: Vec<f64>) -> Result<Self> {
        Self::new(
            format!("cross_polytope{half_diagonals:?}"),
            half_diagonals.len(),
            BodyKind::CrossPolytope { half_diagonals },
        )
    }

    pub fn diag_scaled_cap(angle: ContactAngle, diag: Vec<f64>) -> Result<Self> {
        Self::new(
            format!("diag_scaled_cap(theta={:.6},diag={diag:?})", angle.theta()),
            diag.len(),
            BodyKind::DiagScaledCap { angle, diag },
        )
    }

    /// Radial sampling `ρ = 1/p_K` of another body on an orthant mesh.
    pub fn custom_radial_from(body: &BodySpec, resolution: usize) -> Result<Self> {
        let radial = RadialBody::sample(body.dim, resolution, |u| 1.0 / body.gauge(u))?;
        Self::new(
            format!("custom_radial({})", body.name),
            body.dim,
            BodyKind::CustomRadial(radial),
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// `λK`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        positive(lambda, "scale factor")?;
        let scale_vec = |v: &[f64]| v.iter().map(|x| x * lambda).collect::<Vec<_>>();
        let kind = match &self.kind {
            BodyKind::DoubleCap { angle, scale } => BodyKind::DoubleCap {
                angle: *angle,
                scale: scale * lambda,
            },
            BodyKind::Ball { radius } => BodyKind::Ball {
                radius: radius * lambda,
            },
            BodyKind::Box { half_widths } => BodyKind::Box {
                half_widths: scale_vec(half_widths),
            },
            BodyKind::Ellipsoid { semi_axes } => BodyKind::Ellipsoid {
                semi_axes: scale_vec(semi_axes),
            },
            BodyKind::LpBall { p, scale } => BodyKind::LpBall {
                p: *p,
                scale: scale * lambda,
            },
            BodyKind::CrossPolytope { half_diagonals } => BodyKind::CrossPolytope {
                half_diagonals: scale_vec(half_diagonals),
            },
            BodyKind::DiagScaledCap { angle, diag } => BodyKind::DiagScaledCap {
                angle: *angle,
                diag: scale_vec(diag),
            },
            BodyKind::CustomRadial(r) => BodyKind::CustomRadial(RadialBody {
                mesh: r.mesh.clone(),
                radii: scale_vec(&r.radii),
            }),
        };
        Self::new(format!("{}*{lambda}", self.name), self.dim, kind)
    }

    /// Support function `h_K`. For custom radial bodies this is the exact
    /// support of the sampled point set, a lower bound accurate to first
    /// order in the mesh size.
    pub fn support(&self, y: &[f64]) -> f64 {
        match &self.kind {
            BodyKind::DoubleCap { angle, scale } => scale * cap_support(angle, y),
            BodyKind::Ball { radius } => radius * norm(y),
            BodyKind::Box { half_widths } => half_widths
                .iter()
                .zip(y)
                .map(|(a, v)| a * v.abs())
                .sum(),
            BodyKind::Ellipsoid { semi_axes } => semi_axes
                .iter()
                .zip(y)
                .map(|(a, v)| (a * v).powi(2))
                .sum::<f64>()
                .sqrt(),
            BodyKind::LpBall { p, scale } => scale * lp_norm(y, conjugate(*p)),
            BodyKind::CrossPolytope { half_diagonals } => half_diagonals
                .iter()
                .zip(y)
                .map(|(b, v)| b * v.abs())
                .fold(0.0, f64::max),
            BodyKind::DiagScaledCap { angle, diag } => {
                let ay: Vec<f64> = diag.iter().zip(y).map(|(a, v)| a * v).collect();
                cap_support(angle, &ay)
            }
            BodyKind::CustomRadial(r) => r.support(y),
        }
    }

    /// Minkowski functional `p_K`.
    pub fn gauge(&self, y: &[f64]) -> f64 {
        match &self.kind {
            BodyKind::DoubleCap { angle, scale } => gauge_c(y, angle) / scale,
            BodyKind::Ball { radius } => norm(y) / radius,
            BodyKind::Box { half_widths } => half_widths
                .iter()
                .zip(y)
                .map(|(a, v)| v.abs() / a)
                .fold(0.0, f64::max),
            BodyKind::Ellipsoid { semi_axes } => semi_axes
                .iter()
                .zip(y)
                .map(|(a, v)| (v / a).powi(2))
                .sum::<f64>()
                .sqrt(),
            BodyKind::LpBall { p, scale } => lp_norm(y, *p) / scale,
            BodyKind::CrossPolytope { half_diagonals } => half_diagonals
                .iter()
                .zip(y)
                .map(|(b, v)| v.abs() / b)
                .sum(),
            BodyKind::DiagScaledCap { angle, diag } => {
                let ay: Vec<f64> = diag.iter().zip(y).map(|(a, v)| v / a).collect();
                gauge_c(&ay, angle)
            }
            BodyKind::CustomRadial(r) => {
                let len = norm(y);
                if len == 0.0 {
                    0.0
                } else {
                    len / r.radius(y)
                }
            }
        }
    }

    /// Gauge of the polar body, `p_{K°} = h_K`, for kinds where `h_K` is a
    /// closed form.
    pub fn polar_gauge(&self, y: &[f64]) -> Result<f64> {
        match self.kind {
            BodyKind::CustomRadial(_) => Err(Error::NoPolarGauge(self.kind.tag().into())),
            _ => Ok(self.support(y)),
        }
    }

    /// Catalog polar body, where the polar is again a catalog kind.
    pub fn polar(&self) -> Option<BodySpec> {
        let inv = |v: &[f64]| v.iter().map(|x| 1.0 / x).collect::<Vec<_>>();
        let kind = match &self.kind {
            BodyKind::Ball { radius } => BodyKind::Ball {
                radius: 1.0 / radius,
            },
            BodyKind::Box { half_widths } => BodyKind::CrossPolytope {
                half_diagonals: inv(half_widths),
            },
            BodyKind::CrossPolytope { half_diagonals } => BodyKind::Box {
                half_widths: inv(half_diagonals),
            },
            BodyKind::Ellipsoid { semi_axes } => BodyKind::Ellipsoid {
                semi_axes: inv(semi_axes),
            },
            BodyKind::LpBall { p, scale } => BodyKind::LpBall {
                p: conjugate(*p),
                scale: 1.0 / scale,
            },
            _ => return None,
        };
        Self::new(format!("polar({})", self.name), self.dim, kind).ok()
    }

    pub fn volume(&self) -> f64 {
        let n = self.dim;
        let nf = n as f64;
        match &self.kind {
            BodyKind::DoubleCap { angle, scale } => {
                2.0 * vol_cap_hat(n, angle).expect("angle validated") * scale.powi(n as i32)
            }
            BodyKind::Ball { radius } => unit_ball_volume(n) * radius.powi(n as i32),
            BodyKind::Box { half_widths } => 2f64.powi(n as i32) * half_widths.iter().product::<f64>(),
            BodyKind::Ellipsoid { semi_axes } => {
                unit_ball_volume(n) * semi_axes.iter().product::<f64>()
            }
            BodyKind::LpBall { p, scale } => {
                let unit = if p.is_infinite() {
                    2f64.powi(n as i32)
                } else {
                    (2.0 * gamma(1.0 + 1.0 / p)).powi(n as i32) / gamma(1.0 + nf / p)
                };
                unit * scale.powi(n as i32)
            }
            BodyKind::CrossPolytope { half_diagonals } => {
                2f64.powi(n as i32) * half_diagonals.iter().product::<f64>() / gamma(nf + 1.0)
            }
            BodyKind::DiagScaledCap { angle, diag } => {
                2.0 * vol_cap_hat(n, angle).expect("angle validated") * diag.iter().product::<f64>()
            }
            BodyKind::CustomRadial(r) => r.volume(),
        }
    }

    /// Midpoint convexity of the gauge on seeded pairs. Catalog kinds are
    /// convex by construction.
    pub fn is_convex(&self) -> bool {
        self.is_convex_sampled(0, 20_000)
    }

    pub fn is_convex_sampled(&self, seed: u64, pairs: usize) -> bool {
        if !matches!(self.kind, BodyKind::CustomRadial(_)) {
            return true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let v: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = norm(&v).max(1e-12);
            let r = rng.random_range(0.5..1.5);
            v.iter().map(|x| x / len * r).collect()
        };
        (0..pairs).all(|_| {
            let y = draw(&mut rng);
            let z = draw(&mut rng);
            let mid: Vec<f64> = y.iter().zip(&z).map(|(a, b)| 0.5 * (a + b)).collect();
            self.gauge(&mid) <= 0.5 * (self.gauge(&y) + self.gauge(&z)) + 1e-9
        })
    }

    /// Spot check of unconditionality of `h_K` on seeded directions.
    pub fn is_unconditional_sampled(&self, seed: u64, directions: usize) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..directions).all(|_| {
            let y: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = self.support(&y);
            let ok = mirror(&y).all(|m| (self.support(&m) - h).abs() <= 1e-12 * h.max(1.0));
            ok
        })
    }

    pub fn to_json(&self) -> Value {
        let params = match &self.kind {
            BodyKind::DoubleCap { angle, scale } => {
                json!({"theta": angle.theta(), "scale": scale})
            }
            BodyKind::Ball { radius } => json!({ "radius": radius }),
            BodyKind::Box { half_widths } => json!({ "half_widths": half_widths }),
            BodyKind::Ellipsoid { semi_axes } => json!({ "semi_axes": semi_axes }),
            BodyKind::LpBall { p, scale } => {
                let p = if p.is_infinite() { json!("inf") } else { json!(p) };
                json!({"p": p, "scale": scale})
            }
            BodyKind::CrossPolytope { half_diagonals } => {
                json!({ "half_diagonals": half_diagonals })
            }
            BodyKind::DiagScaledCap { angle, diag } => {
                json!({"theta": angle.theta(), "diag": diag})
            }
            BodyKind::CustomRadial(r) => {
                json!({"resolution": r.mesh.resolution, "radii": r.radii})
            }
        };
        serde_json::to_value(BodyJson {
            kind: self.kind.tag().to_string(),
            dim: self.dim,
            params,
            name: Some(self.name.clone()),
        })
        .expect("body json")
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let raw: BodyJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::BodySpec(e.to_string()))?;
        let n = raw.dim;
        let p = &raw.params;
        let num = |key: &str| -> Result<f64> {
            p.get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::BodySpec(format!("{}: missing number `{key}`", raw.kind)))
        };
        let num_or = |key: &str, default: f64| -> Result<f64> {
            match p.get(key) {
                None => Ok(default),
                Some(_) => num(key),
            }
        };
        let vec = |key: &str| -> Result<Vec<f64>> {
            p.get(key)
                .and_then(Value::as_array)
                .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
                .ok_or_else(|| Error::BodySpec(format!("{}: missing array `{key}`", raw.kind)))
        };
        let kind = match raw.kind.as_str() {
            "double_cap" => BodyKind::DoubleCap {
                angle: ContactAngle::new(num("theta")?)?,
                scale: num_or("scale", 1.0)?,
            },
            "ball" => BodyKind::Ball {
                radius: num_or("radius", 1.0)?,
            },
            "box" => BodyKind::Box {
                half_widths: vec("half_widths")?,
            },
            "ellipsoid" => BodyKind::Ellipsoid {
                semi_axes: vec("semi_axes")?,
            },
            "lp_ball" => {
                let pv = match p.get("p") {
                    Some(Value::String(s)) if s == "inf" || s == "infinity" => f64::INFINITY,
                    _ => num("p")?,
                };
                BodyKind::LpBall {
                    p: pv,
                    scale: num_or("scale", 1.0)?,
                }
            }
            "cross_polytope" => BodyKind::CrossPolytope {
                half_diagonals: vec("half_diagonals")?,
            },
            "diag_scaled_cap" => BodyKind::DiagScaledCap {
                angle: ContactAngle::new(num("theta")?)?,
                diag: vec("diag")?,
            },
            "custom_radial" => {
                let res = p
                    .get("resolution")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::BodySpec("custom_radial: missing `resolution`".into()))?;
                BodyKind::CustomRadial(RadialBody::new(n, res as usize, vec("radii")?)?)
            }
            other => return Err(Error::BodySpec(format!("unknown body kind `{other}`"))),
        };
        let name = raw.name.unwrap_or_else(|| raw.kind.clone());
        Self::new(name, n, kind)
    }
}

#[derive(Serialize, Deserialize)]
struct BodyJson {
    kind: String,
    dim: usize,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    name: Option<String>,
}

fn cap_support(angle: &ContactAngle, y: &[f64]) -> f64 {
    DoubledCap::new(*angle).expect("angle validated").support(y)
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn lp_norm(y: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        y.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        y.iter().map(|v| v.abs()).sum()
    } else {
        let m = y.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * y.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `κ_n = π^{n/2} / Γ(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}

/// A body paired with a contact angle: its boundary in the upper half-space
/// read as a capillary hypersurface.
#[derive(Clone, Debug, PartialEq)]
pub struct CapillaryBody {
    pub base: BodySpec,
    pub angle: ContactAngle,
}

impl CapillaryBody {
    pub fn new(base: BodySpec, angle: ContactAngle) -> Self {
        Self { base, angle }
    }

    /// `s_Σ(ζ) = h_K(x)` with `x = ζ + cosθ E_n`.
    pub fn capillary_support(&self, p: &CapPoint) -> f64 {
        self.base.support(p.x())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapillarityDefect {
    pub capillary: bool,
    /// `cos²θ + (a_n/a_i)² sin²θ − 1` for `i < n`.
    pub defects: Vec<f64>,
}

/// Whether `diag(a)·C_θ` still meets `{x_n = 0}` at angle `θ`.
pub fn is_theta_capillary(a: &[f64], angle: &ContactAngle) -> Result<CapillarityDefect> {
    angle.require_acute()?;
    let n = a.len();
    positive_vec(a, n, "diagonal")?;
    let (c2, s2) = (angle.cos().powi(2), angle.sin().powi(2));
    let an = a[n - 1];
    let defects: Vec<f64> = a[..n - 1]
        .iter()
        .map(|ai| c2 + (an / ai).powi(2) * s2 - 1.0)
        .collect();
    Ok(CapillarityDefect {
        capillary: defects.iter().all(|d| d.abs() <= 1e-12),
        defects,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4};

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::quadrature::cap_rule;

    fn pi3() -> ContactAngle {
        ContactAngle::new(FRAC_PI_3).unwrap()
    }

    fn catalog(n: usize) -> Vec<BodySpec> {
        let mut v = vec![
            BodySpec::ball(n, 1.3).unwrap(),
            BodySpec::double_cap(n, pi3(), 1.7).unwrap(),
            BodySpec::lp_ball(n, 1.5, 0.8).unwrap(),
            BodySpec::lp_ball(n, 3.0, 1.0).unwrap(),
            BodySpec::lp_ball(n, f64::INFINITY, 1.0).unwrap(),
            BodySpec::lp_ball(n, 1.0, 2.0).unwrap(),
        ];
        let a: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
        v.push(BodySpec::cuboid(a.clone()).unwrap());
        v.push(BodySpec::ellipsoid(a.clone()).unwrap());
        v.push(BodySpec::cross_polytope(a.clone()).unwrap());
        v.push(BodySpec::diag_scaled_cap(pi3(), a).unwrap());
        v
    }

    fn directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let l = norm(&v);
                v.iter().map(|x| x / l).collect()
            })
            .collect()
    }

    #[test]
    fn support_examples() {
        let ball = BodySpec::ball(2, 1.0).unwrap();
        for u in directions(2, 10, 1) {
            assert_abs_diff_eq!(ball.support(&u), 1.0, epsilon = 1e-15);
        }
        let b = BodySpec::cuboid(vec![1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(
            b.support(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
            3.0 * FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        let cap = BodySpec::double_cap(2, pi3(), 1.0).unwrap();
        let rule = cap_rule(2, &pi3(), 16).unwrap();
        for x in &rule.nodes {
            assert_abs_diff_eq!(cap.support(x), pi3().ell_at(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn gauge_examples() {
        let ball = BodySpec::ball(3, 1.0).unwrap();
        assert_abs_diff_eq!(ball.gauge(&[1.0, 2.0, 2.0]), 3.0, epsilon = 1e-15);
        let e = BodySpec::ellipsoid(vec![2.0, 0.5]).unwrap();
        assert_abs_diff_eq!(e.gauge(&[2.0, 0.0]), 1.0, epsilon = 1e-15);
        let cap = BodySpec::double_cap(3, pi3(), 1.0).unwrap();
        let c = DoubledCap::new(pi3()).unwrap();
        for u in directions(3, 100, 2) {
            assert_abs_diff_eq!(cap.gauge(&u), c.gauge(&u), epsilon = 1e-12);
        }
    }

    #[test]
    fn volumes() {
        assert_abs_diff_eq!(BodySpec::ball(2, 1.0).unwrap().volume(), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(
            BodySpec::cuboid(vec![1.0, 1.0]).unwrap().volume(),
            4.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            BodySpec::ball(3, 2.0).unwrap().volume(),
            32.0 * PI / 3.0,
            epsilon = 1e-12
        );
        // ℓ1 ball of R^3 is the octahedron with volume 4/3; ℓ2 matches the ball
        assert_abs_diff_eq!(
            BodySpec::lp_ball(3, 1.0, 1.0).unwrap().volume(),
            4.0 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            BodySpec::lp_ball(2, 2.0, 1.0).unwrap().volume(),
            PI,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            BodySpec::cross_polytope(vec![1.0, 1.0]).unwrap().volume(),
            2.0,
            epsilon = 1e-14
        );
        let radial = BodySpec::custom_radial_from(&BodySpec::ball(2, 1.0).unwrap(), 32).unwrap();
        assert_abs_diff_eq!(radial.volume(), PI, epsilon = 1e-6);
        let radial3 = BodySpec::custom_radial_from(&BodySpec::ball(3, 1.0).unwrap(), 24).unwrap();
        assert_abs_diff_eq!(radial3.volume(), 4.0 * PI / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn custom_radial_volume_converges_at_declared_order() {
        // kinked radial function: midpoint-type convergence, order 2
        for n in [2, 3] {
            let ball15 = BodySpec::lp_ball(n, 1.5, 1.0).unwrap();
            let exact = ball15.volume();
            let errs: Vec<f64> = [8usize, 16, 32, 64]
                .iter()
                .map(|&m| {
                    (BodySpec::custom_radial_from(&ball15, m).unwrap().volume() - exact).abs()
                })
                .collect();
            let slope = fitted_slope(&[8.0, 16.0, 32.0, 64.0], &errs);
            assert!(slope >= 2.0 - 0.5, "n={n} slope {slope} errs {errs:?}");
        }
    }

    fn fitted_slope(h: &[f64], e: &[f64]) -> f64 {
        let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        -num / den
    }

    #[test]
    fn unconditional_catalog() {
        for n in [2, 3] {
            for b in catalog(n) {
                assert!(b.is_unconditional_sampled(7, 100), "{}", b.name());
            }
        }
    }

    #[test]
    fn gauge_support_duality() {
        for n in [2, 3] {
            for b in catalog(n) {
                let Some(polar) = b.polar() else { continue };
                for u in directions(n, 200, 3) {
                    assert_abs_diff_eq!(b.gauge(&u), polar.support(&u), epsilon = 1e-10);
                    assert_abs_diff_eq!(b.support(&u), polar.gauge(&u), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn gauge_is_one_on_boundary() {
        for n in [2, 3] {
            for b in catalog(n) {
                for u in directions(n, 50, 4) {
                    let g = b.gauge(&u);
                    let x: Vec<f64> = u.iter().map(|v| v / g).collect();
                    assert_abs_diff_eq!(b.gauge(&x), 1.0, epsilon = 1e-12);
                    // support at the boundary point's direction dominates <x, u>
                    assert!(b.support(&u) >= dot(&x, &u) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn capillary_support_examples() {
        let a = pi3();
        let rule = cap_rule(2, &a, 24).unwrap();
        let cap = CapillaryBody::new(BodySpec::double_cap(2, a, 1.0).unwrap(), a);
        let scaled = CapillaryBody::new(BodySpec::diag_scaled_cap(a, vec![2.5, 2.5]).unwrap(), a);
        let bx = CapillaryBody::new(BodySpec::cuboid(vec![1.0, 0.4]).unwrap(), a);
        let c = DoubledCap::new(a).unwrap();
        for x in &rule.nodes {
            let p = CapPoint::new(x.clone(), &a).unwrap();
            assert_abs_diff_eq!(cap.capillary_support(&p), c.ell(&p), epsilon = 1e-15);
            assert_abs_diff_eq!(scaled.capillary_support(&p), 2.5 * c.ell(&p), epsilon = 1e-14);
            // vertex enumeration
            let best = [[1.0, 0.4], [-1.0, 0.4], [1.0, -0.4], [-1.0, -0.4]]
                .iter()
                .map(|v| v[0] * x[0] + v[1] * x[1])
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(bx.capillary_support(&p), best, epsilon = 1e-15);
        }
    }

    #[test]
    fn capillarity_defects() {
        let d = is_theta_capillary(&[2.0, 2.0, 2.0], &pi3()).unwrap();
        assert!(d.capillary);
        assert!(d.defects.iter().all(|v| v.abs() < 1e-15));
        let d = is_theta_capillary(&[1.0, 2.0], &pi3()).unwrap();
        assert!(!d.capillary);
        assert_abs_diff_eq!(d.defects[0], 2.25, epsilon = 1e-14);
        let q = ContactAngle::new(FRAC_PI_4).unwrap();
        assert!(is_theta_capillary(&[1.0, 1.0], &q).unwrap().capillary);
        let right = ContactAngle::new(std::f64::consts::FRAC_PI_2).unwrap();
        assert!(is_theta_capillary(&[1.0, 1.0], &right).is_err());
    }

    #[test]
    fn convexity_checks() {
        assert!(BodySpec::ball(2, 1.0).unwrap().is_convex());
        let bx = BodySpec::cuboid(vec![1.0, 0.5]).unwrap();
        assert!(BodySpec::custom_radial_from(&bx, 48).unwrap().is_convex());
        let ell = BodySpec::ellipsoid(vec![1.0, 0.5]).unwrap();
        assert!(BodySpec::custom_radial_from(&ell, 48).unwrap().is_convex());
        // 20% dent around φ = π/4
        let dented = RadialBody::sample(2, 48, |u| {
            let phi = u[1].atan2(u[0]);
            1.0 - 0.2 * (-((phi - FRAC_PI_4) / 0.15).powi(2)).exp()
        })
        .unwrap();
        let body = BodySpec::new("dented", 2, BodyKind::CustomRadial(dented)).unwrap();
        assert!(!body.is_convex());
    }

    #[test]
    fn custom_radial_support_is_a_close_lower_bound() {
        let e = BodySpec::ellipsoid(vec![1.0, 0.5]).unwrap();
        let r = BodySpec::custom_radial_from(&e, 64).unwrap();
        for u in directions(2, 50, 5) {
            let (exact, approx) = (e.support(&u), r.support(&u));
            assert!(approx <= exact + 1e-12);
            assert!(exact - approx < 2e-3, "{exact} {approx}");
            assert_abs_diff_eq!(r.gauge(&u), e.gauge(&u), epsilon = 2e-3);
        }
        assert!(r.polar_gauge(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        for n in [2, 3] {
            let mut bodies = catalog(n);
            bodies.push(BodySpec::custom_radial_from(&BodySpec::ball(n, 1.0).unwrap(), 8).unwrap());
            for b in bodies {
                let v = b.to_json();
                assert!(v.get("kind").is_some() && v.get("params").is_some());
                assert_eq!(v["dim"], n);
                let back = BodySpec::from_json(&v).unwrap();
                assert_eq!(back, b);
            }
        }
        let bad = json!({"kind": "box", "dim": 3, "params": {"half_widths": [1.0, 2.0]}});
        assert!(BodySpec::from_json(&bad).is_err());
        let unknown = json!({"kind": "torus", "dim": 3, "params": {}});
        assert!(BodySpec::from_json(&unknown).is_err());
    }
}
