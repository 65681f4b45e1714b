//! Sweeps over bodies and angles, and the full verification run.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_3, FRAC_PI_6};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bodies::{BodySpec, CapillaryBody};
use crate::cap::ContactAngle;
use crate::error::{Error, Result};
use crate::functionals::{volume_product, VolumeProductReport};
use crate::linearized::{theorem2_margin, theorem2_sweep, CapFunction};
use crate::quadrature::{cap_rule, cap_rule_graded_split, QuadratureRule};
use crate::verification::{
    check_key_inequality, check_lemma1, check_lemma1_obtuse, check_lemma2, check_lemma3,
    check_two_concavity, CheckResult,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerances on `vol(Ĉ)² − product`.
pub const THEOREM1_TOL_2D: f64 = 1e-6;
pub const THEOREM1_TOL_3D: f64 = 1e-4;
/// Margin every non-cap body must clear.
pub const THEOREM1_STRICT: f64 = 1e-4;
pub const EQUALITY_TOL_2D: f64 = 1e-8;
pub const EQUALITY_TOL_3D: f64 = 1e-5;
pub const THEOREM2_TOL: f64 = 1e-7;
pub const CONSTANT_TOL: f64 = 1e-10;

/// Aspect ratios used for boxes and ellipsoids in the sweep.
pub const BOX_ASPECTS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const ELLIPSOID_ASPECTS: [f64; 5] = [0.25, 0.5, 0.75, 1.5, 3.0];
pub const LP_EXPONENTS: [f64; 4] = [1.0, 1.5, 3.0, f64::INFINITY];

fn axes(n: usize, r: f64) -> Vec<f64> {
    match n {
        2 => vec![1.0, r],
        _ => vec![1.0, r.sqrt(), r],
    }
}

/// Ball, five boxes, five ellipsoids and four `ℓ_p` balls.
pub fn sweep_bodies(n: usize) -> Result<Vec<BodySpec>> {
    let mut out = vec![BodySpec::ball(n, 1.0)?.with_name("ball")];
    for r in BOX_ASPECTS {
        out.push(BodySpec::cuboid(axes(n, r))?.with_name(format!("box_{r}")));
    }
    for r in ELLIPSOID_ASPECTS {
        out.push(BodySpec::ellipsoid(axes(n, r))?.with_name(format!("ellipsoid_{r}")));
    }
    for p in LP_EXPONENTS {
        out.push(BodySpec::lp_ball(n, p, 1.0)?.with_name(format!("lp_{p}")));
    }
    Ok(out)
}

/// Rule for bodies with kinked support functions: in the plane, Gauss panels
/// graded toward the rim with breaks on the diagonals and the axis; in space,
/// the tensor rule, whose azimuth cells have edges on every multiple of π/4.
pub fn sweep_rule(n: usize, angle: &ContactAngle, resolution: usize) -> Result<QuadratureRule> {
    match n {
        2 => cap_rule_graded_split(angle, resolution.min(32), 4, &[FRAC_PI_4, 3.0 * FRAC_PI_4]),
        _ => cap_rule(n, angle, resolution),
    }
}

/// Resolutions at which the equality case is checked.
pub fn default_resolution(n: usize) -> usize {
    if n == 2 {
        64
    } else {
        48
    }
}

pub fn theorem1_tolerance(n: usize) -> f64 {
    if n == 2 {
        THEOREM1_TOL_2D
    } else {
        THEOREM1_TOL_3D
    }
}

/// `vol(Ĉ)²` against `λC_θ` for `λ ∈ {0.5, 1, 3}`.
pub fn check_theorem1_equality(n: usize, angle: &ContactAngle, resolution: usize) -> Result<CheckResult> {
    angle.require_acute()?;
    let rule = cap_rule(n, angle, resolution)?;
    let tol = if n == 2 { EQUALITY_TOL_2D } else { EQUALITY_TOL_3D };
    let parts = [0.5, 1.0, 3.0]
        .iter()
        .map(|&l| {
            let cb = CapillaryBody::new(BodySpec::double_cap(n, *angle, l)?, *angle);
            let r = volume_product(&cb, &rule)?;
            Ok(CheckResult::leaf(
                format!("scaled_cap_{l}"),
                n,
                angle,
                rule.len(),
                0,
                -(r.product - r.bound).abs(),
                tol,
                "closed-form cap volume squared",
            )
            .with_detail("product", r.product)
            .with_detail("bound", r.bound))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckResult::group("theorem1_equality", n, angle, 0, parts))
}

/// Volume products of the sweep bodies with a bound check and the strict
/// margin for each.
pub fn theorem1_sweep(
    n: usize,
    angle: &ContactAngle,
    resolution: usize,
    bodies: &[BodySpec],
) -> Result<(CheckResult, Vec<VolumeProductReport>)> {
    angle.require_acute()?;
    let rule = sweep_rule(n, angle, resolution)?;
    let reports = bodies
        .par_iter()
        .map(|b| volume_product(&CapillaryBody::new(b.clone(), *angle), &rule))
        .collect::<Result<Vec<_>>>()?;
    let tol = theorem1_tolerance(n);
    let mut parts = Vec::new();
    for r in &reports {
        parts.push(
            CheckResult::leaf(
                format!("{}_bound", r.name),
                n,
                angle,
                rule.len(),
                0,
                r.margin,
                tol,
                "closed-form cap volume squared",
            )
            .with_detail("product", r.product),
        );
        parts.push(CheckResult::leaf(
            format!("{}_strict", r.name),
            n,
            angle,
            rule.len(),
            0,
            r.margin - THEOREM1_STRICT,
            0.0,
            "margin above the strictness threshold",
        ));
    }
    Ok((CheckResult::group("theorem1_sweep", n, angle, 0, parts), reports))
}

/// Linearized-inequality margins over seeded admissible functions plus
/// equality at constants.
pub fn check_theorem2(
    n: usize,
    angle: &ContactAngle,
    resolution: usize,
    modes: usize,
    seed: u64,
    count: usize,
) -> Result<CheckResult> {
    angle.require_acute()?;
    let margins = theorem2_sweep(n, angle, resolution, modes, seed, count)?;
    let worst = margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min);
    let near_equality = margins.iter().filter(|m| m.margin < 1e-6).count();
    let sweep = CheckResult::leaf(
        "random_admissible",
        n,
        angle,
        count,
        seed,
        worst,
        THEOREM2_TOL,
        "spectral discretization of the operator on the Gauss grid",
    )
    .with_detail("near_equality", near_equality as f64);
    let mut constant = 0.0f64;
    for c in [1.0, 5.0] {
        let f = CapFunction::from_fn(n, angle, resolution, |_| c)?;
        constant = constant.max(theorem2_margin(&f)?.margin.abs());
    }
    let eq = CheckResult::leaf(
        "constants",
        n,
        angle,
        2,
        seed,
        -constant,
        CONSTANT_TOL,
        "equality for constant functions",
    );
    Ok(CheckResult::group("theorem2", n, angle, seed, vec![sweep, eq]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub thetas: Vec<f64>,
    pub dims: Vec<usize>,
    /// Gauss resolution per dimension for the volume products.
    pub resolution: Option<usize>,
    /// Random points per pointwise lemma check.
    pub samples: usize,
    /// Monte Carlo samples for the Gaussian inequality.
    pub mc_samples: usize,
    pub seed: u64,
    pub modes: usize,
    /// Extra bodies appended to the sweep catalog.
    #[serde(default)]
    pub bodies: Vec<Value>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            thetas: vec![FRAC_PI_6, FRAC_PI_4, FRAC_PI_3, 0.49 * std::f64::consts::PI],
            dims: vec![2, 3],
            resolution: None,
            samples: 200,
            mc_samples: 200_000,
            seed: 7,
            modes: 8,
            bodies: Vec::new(),
        }
    }
}

impl SuiteConfig {
    /// Rejects angles outside the acute range, since every check in the
    /// suite except the obtuse concavity check needs `θ < π/2`.
    pub fn validate(&self) -> Result<Vec<ContactAngle>> {
        if self.thetas.is_empty() || self.dims.is_empty() {
            return Err(Error::InvalidParameter("empty theta or dimension list".into()));
        }
        if let Some(n) = self.dims.iter().find(|n| !matches!(n, 2 | 3)) {
            return Err(Error::UnsupportedDimension(*n, "n in {2, 3}"));
        }
        if let Some(r) = self.resolution {
            if r < 8 {
                return Err(Error::Resolution { got: r, min: 8 });
            }
        }
        self.thetas
            .iter()
            .map(|&t| {
                let a = ContactAngle::new(t)?;
                a.require_acute()?;
                Ok(a)
            })
            .collect()
    }

    fn extra_bodies(&self, n: usize) -> Result<Vec<BodySpec>> {
        let mut out = Vec::new();
        for v in &self.bodies {
            let b = BodySpec::from_json(v)?;
            if b.dim() == n {
                out.push(b);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub config: Value,
    pub checks: Vec<CheckResult>,
    pub tables: BTreeMap<String, Value>,
    pub version: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Every check of the suite at every `(θ, n)`; output order is fixed.
pub fn run_verify(config: &SuiteConfig) -> Result<Report> {
    let angles = config.validate()?;
    let mut jobs = Vec::new();
    for a in &angles {
        for &n in &config.dims {
            jobs.push((*a, n));
        }
    }
    let results = jobs
        .par_iter()
        .map(|(a, n)| run_job(config, a, *n))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut tables = BTreeMap::new();
    for ((a, n), (c, rows)) in jobs.iter().zip(results) {
        checks.extend(c);
        tables.insert(
            format!("volume_products_n{n}_theta{:.6}", a.theta()),
            json!(rows),
        );
    }
    // the concavity of V(√x) flips to convexity for an obtuse angle
    for &n in &config.dims {
        let obtuse = ContactAngle::new(2.0 * FRAC_PI_3)?;
        checks.push(check_lemma1_obtuse(n, &obtuse, config.samples, config.seed)?);
    }
    Ok(Report {
        config: serde_json::to_value(config).expect("config serializes"),
        checks,
        tables,
        version: VERSION.to_string(),
    })
}

fn run_job(
    config: &SuiteConfig,
    a: &ContactAngle,
    n: usize,
) -> Result<(Vec<CheckResult>, Vec<VolumeProductReport>)> {
    let seed = config.seed;
    let res = config.resolution.unwrap_or_else(|| default_resolution(n));
    let mut bodies = sweep_bodies(n)?;
    bodies.extend(config.extra_bodies(n)?);
    let (sweep, rows) = theorem1_sweep(n, a, res, &bodies)?;
    let spectral_res = if n == 2 { 64 } else { 24 };
    let modes = if n == 2 { config.modes } else { config.modes.min(4) };
    let mut checks = vec![
        check_lemma1(n, a, config.samples, seed)?,
        check_lemma2(n, a, config.samples, seed)?,
        check_lemma3(n, a, config.samples, seed)?,
        check_two_concavity(n, a, config.samples, seed)?,
        check_theorem1_equality(n, a, res)?,
        sweep,
        check_theorem2(n, a, spectral_res, modes, seed, 20)?,
    ];
    for body in [
        BodySpec::double_cap(n, *a, 1.0)?.with_name("cap"),
        BodySpec::ball(n, 1.0)?.with_name("ball"),
        BodySpec::cuboid(vec![1.0; n])?.with_name("box"),
    ] {
        let mut c = check_key_inequality(&body, a, config.mc_samples, seed)?;
        c.name = format!("key_inequality_{}", body.name());
        checks.push(c);
    }
    Ok((checks, rows))
}

/// Whether `θ` is within roundoff of a right angle, where several checks
/// degenerate.
pub fn is_right_angle(theta: f64) -> bool {
    (theta - FRAC_PI_2).abs() < 1e-12
}
