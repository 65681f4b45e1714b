use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use capillary::bodies::{BodySpec, CapillaryBody};
use capillary::cap::ContactAngle;
use capillary::functionals::{volume_product, VolumeProductReport};
use capillary::linearized::{second_variation_table, theorem2_sweep};
use capillary::obtuse::{example1_product, example2_product, FamilyTable};
use capillary::report::{bars_svg, loglog_svg};
use capillary::suite::{run_verify, sweep_rule, theorem1_tolerance, Report, SuiteConfig, VERSION};
use capillary::verification::CheckResult;
use capillary::Error;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "capillary", version, about = "Capillary volume products and their checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every check and write verification_report.json
    Verify(VerifyArgs),
    /// Volume product of the given bodies against the cap bound
    VolumeProduct(VolumeArgs),
    /// The stretched-cap family at an obtuse angle
    Example1(Example1Args),
    /// The cut-ellipse family at an obtuse angle
    Example2(Example2Args),
    /// Linearized inequality margins and second-variation cross-check
    Linearized(LinearizedArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Comma-separated subset of json,csv,svg
    #[arg(long, default_value = "json,csv")]
    format: String,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Contact angles in radians or pi/6, pi/4, pi/3, pi/2 (comma separated)
    #[arg(long, value_delimiter = ',')]
    theta: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    /// Monte Carlo samples for the Gaussian inequality
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
    /// Random points per pointwise check
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 8)]
    modes: usize,
    /// Extra body as JSON or a catalog name
    #[arg(long)]
    body: Vec<String>,
    #[arg(long)]
    bodies_file: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VolumeArgs {
    /// Body as JSON or one of ball, box, cap, cross, lp<p>
    #[arg(long)]
    body: Vec<String>,
    #[arg(long)]
    bodies_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "pi/3")]
    theta: Vec<String>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    resolution: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Example1Args {
    #[arg(long, default_value = "2pi/3")]
    theta: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    lambda: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Example2Args {
    #[arg(long, default_value = "2pi/3")]
    theta: String,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
    b: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LinearizedArgs {
    #[arg(long, value_delimiter = ',', default_value = "pi/3")]
    theta: Vec<String>,
    #[arg(long, default_value_t = 8)]
    modes: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    /// Admissible functions per angle
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 1e-3)]
    t_step: f64,
    #[command(flatten)]
    common: Common,
}

/// Exit 2 for configuration problems, 1 for failed checks or numerical
/// breakdowns.
#[derive(Debug)]
enum Failure {
    Config(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonPositiveSupport { .. }
            | Error::NonFinite { .. }
            | Error::NotConvex(_)
            | Error::BoundaryCondition { .. }
            | Error::RangeViolation { .. } => Failure::Check(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(format!("{e:#}"))
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::VolumeProduct(a) => cmd_volume_product(a),
        Command::Example1(a) => cmd_example1(a),
        Command::Example2(a) => cmd_example2(a),
        Command::Linearized(a) => cmd_linearized(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Radians, or `pi/k` and `mpi/k` spelled out.
fn parse_theta(s: &str) -> Result<f64, Failure> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    if let Some((lhs, rhs)) = t.split_once("pi") {
        let m = if lhs.is_empty() {
            1.0
        } else {
            lhs.trim_end_matches('*').parse::<f64>().map_err(|_| bad_theta(s))?
        };
        let k = match rhs {
            "" => 1.0,
            r => r
                .strip_prefix('/')
                .and_then(|d| d.parse::<f64>().ok())
                .ok_or_else(|| bad_theta(s))?,
        };
        return Ok(m * PI / k);
    }
    t.parse::<f64>().map_err(|_| bad_theta(s))
}

fn bad_theta(s: &str) -> Failure {
    Failure::Config(format!("cannot parse angle `{s}`; use radians or pi/6, pi/4, pi/3, pi/2"))
}

fn angles(list: &[String]) -> Result<Vec<ContactAngle>, Failure> {
    list.iter()
        .map(|s| Ok(ContactAngle::new(parse_theta(s)?)?))
        .collect()
}

fn formats(common: &Common) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    for f in common.format.split(',').map(str::trim).filter(|f| !f.is_empty()) {
        if !matches!(f, "json" | "csv" | "svg") {
            return Err(Failure::Config(format!("unknown format `{f}`; use json, csv, svg")));
        }
        out.push(f.to_string());
    }
    Ok(out)
}

/// Writes through a temporary file in the same directory.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))?;
    let tmp = dir.join(format!(".{name}.tmp"));
    let dst = dir.join(name);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &dst).with_context(|| format!("renaming to {}", dst.display()))?;
    Ok(())
}

fn body_from_arg(arg: &str, dim: usize, angle: Option<&ContactAngle>) -> Result<BodySpec, Failure> {
    let t = arg.trim();
    if t.starts_with('{') {
        let v: Value = serde_json::from_str(t)
            .map_err(|e| Failure::Config(format!("body JSON: {e}")))?;
        return Ok(BodySpec::from_json(&v)?);
    }
    let body = match t {
        "ball" => BodySpec::ball(dim, 1.0)?,
        "box" => BodySpec::cuboid(vec![1.0; dim])?,
        "cross" | "cross_polytope" => BodySpec::cross_polytope(vec![1.0; dim])?,
        "cap" | "double_cap" => {
            let a = angle.ok_or_else(|| Failure::Config("`cap` needs an angle".into()))?;
            BodySpec::double_cap(dim, *a, 1.0)?
        }
        other => match other.strip_prefix("lp") {
            Some(p) => {
                let p = if p == "inf" {
                    f64::INFINITY
                } else {
                    p.parse::<f64>()
                        .map_err(|_| Failure::Config(format!("bad exponent in `{other}`")))?
                };
                BodySpec::lp_ball(dim, p, 1.0)?
            }
            None => {
                return Err(Failure::Config(format!(
                    "unknown body `{other}`; use JSON or ball, box, cap, cross, lp<p>"
                )))
            }
        },
    };
    Ok(body.with_name(t))
}

fn bodies_file(path: &Path) -> Result<Vec<Value>, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    match v {
        Value::Array(items) => Ok(items),
        other => Ok(vec![other]),
    }
}

fn print_check(c: &CheckResult) {
    print_check_at(c, 0);
}

fn print_check_at(c: &CheckResult, depth: usize) {
    println!(
        "{:indent$}{} {} n={} theta={:.6} margin={:.3e} tol={:.1e}",
        "",
        if c.passed { "PASS" } else { "FAIL" },
        c.name,
        c.n,
        c.theta,
        c.worst_margin,
        c.tolerance,
        indent = 2 * depth
    );
    for part in &c.components {
        print_check_at(part, depth + 1);
    }
}

fn cmd_verify(a: VerifyArgs) -> Outcome {
    let seed = a
        .seed
        .ok_or_else(|| Failure::Config("verify uses Monte Carlo and needs --seed".into()))?;
    let fmts = formats(&a.common)?;
    let mut config = SuiteConfig {
        samples: a.points,
        mc_samples: a.samples,
        seed,
        modes: a.modes,
        resolution: a.resolution,
        ..SuiteConfig::default()
    };
    if !a.theta.is_empty() {
        config.thetas = a.theta.iter().map(|s| parse_theta(s)).collect::<Result<_, _>>()?;
    }
    if !a.dim.is_empty() {
        config.dims = a.dim.clone();
    }
    if let Some(path) = &a.bodies_file {
        config.bodies.extend(bodies_file(path)?);
    }
    for b in &a.body {
        for &n in &config.dims {
            config.bodies.push(body_from_arg(b, n, None)?.to_json());
        }
    }
    if let Err(e) = config.validate() {
        return Err(Failure::Config(format!(
            "{e}; every check in verify applies to acute contact angles only"
        )));
    }
    let report = run_verify(&config)?;
    for c in &report.checks {
        print_check(c);
    }
    write_atomic(&a.common.out, "verification_report.json", &report.to_json_string())?;
    if fmts.iter().any(|f| f == "csv") {
        let mut csv = String::from(VolumeProductReport::CSV_HEADER);
        csv.push('\n');
        for rows in report.tables.values() {
            let rows: Vec<VolumeProductReport> = rows
                .as_array()
                .into_iter()
                .flatten()
                .map(row_from_value)
                .collect();
            for r in rows {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
        }
        write_atomic(&a.common.out, "volume_products.csv", &csv)?;
    }
    if fmts.iter().any(|f| f == "svg") {
        let bars: Vec<(String, f64)> = report
            .checks
            .iter()
            .map(|c| (format!("{} n={} θ={:.3}", c.name, c.n, c.theta), c.slack()))
            .collect();
        write_atomic(&a.common.out, "verification_margins.svg", &bars_svg("slack (margin + tol) / tol", &bars))?;
    }
    let passed = report.passed();
    println!("{}", if passed { "all checks passed" } else { "some checks failed" });
    Ok(passed)
}

fn row_from_value(v: &Value) -> VolumeProductReport {
    let f = |k: &str| v.get(k).and_then(Value::as_f64).unwrap_or(f64::NAN);
    VolumeProductReport {
        name: v.get("name").and_then(Value::as_str).unwrap_or_default().to_string(),
        n: v.get("n").and_then(Value::as_u64).unwrap_or_default() as usize,
        theta: f("theta"),
        vol_hat: f("vol_hat"),
        vol_polar: f("vol_polar"),
        product: f("product"),
        bound: f("bound"),
        margin: f("margin"),
        resolution: v.get("resolution").and_then(Value::as_u64).unwrap_or_default() as usize,
    }
}

fn cmd_volume_product(a: VolumeArgs) -> Outcome {
    let fmts = formats(&a.common)?;
    let thetas = angles(&a.theta)?;
    if a.body.is_empty() && a.bodies_file.is_none() {
        return Err(Failure::Config("give at least one --body or --bodies-file".into()));
    }
    let resolution = a
        .resolution
        .unwrap_or(if a.dim == 2 { 64 } else { 48 });
    if resolution < 8 {
        return Err(Failure::Config(format!("resolution {resolution} is below 8")));
    }
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for angle in &thetas {
        angle.require_acute()?;
        let mut bodies = Vec::new();
        for b in &a.body {
            bodies.push(body_from_arg(b, a.dim, Some(angle))?);
        }
        if let Some(path) = &a.bodies_file {
            for v in bodies_file(path)? {
                bodies.push(BodySpec::from_json(&v)?);
            }
        }
        let rule = sweep_rule(a.dim, angle, resolution)?;
        for body in bodies {
            if body.dim() != a.dim {
                return Err(Failure::Config(format!(
                    "body `{}` has dimension {}, expected {}",
                    body.name(),
                    body.dim(),
                    a.dim
                )));
            }
            let r = volume_product(&CapillaryBody::new(body, *angle), &rule)?;
            println!(
                "{} theta={:.6} product={:.12e} bound={:.12e} margin={:.6e}",
                r.name, r.theta, r.product, r.bound, r.margin
            );
            checks.push(CheckResult::leaf(
                format!("volume_product_{}", r.name),
                a.dim,
                angle,
                rule.len(),
                0,
                r.margin,
                theorem1_tolerance(a.dim),
                "closed-form cap volume squared",
            ));
            rows.push(r);
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    let mut csv = String::from(VolumeProductReport::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let config = json!({
        "command": "volume-product",
        "theta": thetas.iter().map(|t| t.theta()).collect::<Vec<_>>(),
        "dim": a.dim,
        "resolution": resolution,
        "bodies": a.body,
    });
    let mut tables = BTreeMap::new();
    tables.insert("volume_products".to_string(), json!(rows));
    emit(&a.common, &fmts, "volume_product", config, checks, tables, &[("volume_products.csv", csv)])?;
    if fmts.iter().any(|f| f == "svg") {
        let bars: Vec<(String, f64)> = rows
            .iter()
            .map(|r| (format!("{} θ={:.3}", r.name, r.theta), r.margin))
            .collect();
        write_atomic(&a.common.out, "volume_product_margins.svg", &bars_svg("vol(Ĉ)² − product", &bars))?;
    }
    Ok(passed)
}

#[allow(clippy::too_many_arguments)]
fn emit(
    common: &Common,
    fmts: &[String],
    stem: &str,
    config: Value,
    checks: Vec<CheckResult>,
    tables: BTreeMap<String, Value>,
    csvs: &[(&str, String)],
) -> Result<(), Failure> {
    if fmts.iter().any(|f| f == "json") {
        let report = Report {
            config,
            checks,
            tables,
            version: VERSION.to_string(),
        };
        write_atomic(&common.out, &format!("{stem}_report.json"), &report.to_json_string())?;
    }
    if fmts.iter().any(|f| f == "csv") {
        for (name, body) in csvs {
            write_atomic(&common.out, name, body)?;
        }
    }
    Ok(())
}

fn family_outcome(common: &Common, table: FamilyTable, param: &str) -> Outcome {
    let fmts = formats(common)?;
    println!("{:>10} {:>16} {:>16} {:>16}", param, "vol_hat", "vol_polar", "product");
    for r in &table.rows {
        println!(
            "{:>10} {:>16.9e} {:>16.9e} {:>16.9e}",
            r.param, r.vol_hat, r.vol_polar, r.product
        );
    }
    println!("fitted log-log slope: {:.4}", table.slope);
    println!("product ratio last/first: {:.4e}", table.ratio);
    println!("strictly increasing: {}", if table.increasing { "yes" } else { "no" });
    let angle = ContactAngle::new(table.theta)?;
    let samples = table.rows.len();
    let checks = vec![
        CheckResult::leaf(
            format!("{}_increasing", table.name),
            2,
            &angle,
            samples,
            0,
            if table.increasing { 0.0 } else { -1.0 },
            0.0,
            "consecutive products",
        ),
        CheckResult::leaf(
            format!("{}_ratio", table.name),
            2,
            &angle,
            samples,
            0,
            table.ratio - 10.0,
            0.0,
            "last over first product at least 10",
        ),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let config = json!({
        "command": table.name,
        "theta": table.theta,
        param: table.rows.iter().map(|r| r.param).collect::<Vec<_>>(),
    });
    let mut tables = BTreeMap::new();
    tables.insert(table.name.clone(), json!(table));
    let csv_name = format!("{}.csv", table.name);
    emit(common, &fmts, &table.name, config, checks, tables, &[(&csv_name, table.to_csv())])?;
    if fmts.iter().any(|f| f == "svg") {
        let pts: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.param, r.product)).collect();
        let svg = loglog_svg(
            &format!("{}: volume product, θ = {:.4}", table.name, table.theta),
            param,
            "vol(Σ̂)·vol(Σ̂*)",
            &pts,
        );
        write_atomic(&common.out, &format!("{}.svg", table.name), &svg)?;
    }
    Ok(passed)
}

fn cmd_example1(a: Example1Args) -> Outcome {
    let angle = ContactAngle::new(parse_theta(&a.theta)?)?;
    let table = example1_product(&a.lambda, &angle)?;
    family_outcome(&a.common, table, "lambda")
}

fn cmd_example2(a: Example2Args) -> Outcome {
    let angle = ContactAngle::new(parse_theta(&a.theta)?)?;
    let table = example2_product(&a.b, &angle)?;
    let ok = table.slope >= 0.8 && table.rows.iter().all(|r| r.vol_hat >= PI / 2.0 - 1e-9);
    Ok(family_outcome(&a.common, table, "b")? && ok)
}

fn cmd_linearized(a: LinearizedArgs) -> Outcome {
    let seed = a
        .seed
        .ok_or_else(|| Failure::Config("linearized draws random functions and needs --seed".into()))?;
    let fmts = formats(&a.common)?;
    let thetas = angles(&a.theta)?;
    if a.resolution < 8 {
        return Err(Failure::Config(format!("resolution {} is below 8", a.resolution)));
    }
    let sv_tol = (10.0 * a.t_step * a.t_step).max(1e-4);
    let mut checks = Vec::new();
    let mut margin_csv = String::from("theta,seed,lhs,rhs,margin\n");
    let mut sv_csv = String::from("theta,seed,formula,finite_difference,difference\n");
    let mut tables = BTreeMap::new();
    for angle in &thetas {
        angle.require_non_obtuse()?;
        let margins = theorem2_sweep(2, angle, a.resolution, a.modes, seed, a.count)?;
        for (k, m) in margins.iter().enumerate() {
            margin_csv.push_str(&format!(
                "{:.12},{},{:.12e},{:.12e},{:.6e}\n",
                angle.theta(),
                seed + k as u64,
                m.lhs,
                m.rhs,
                m.margin
            ));
        }
        let worst = margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min);
        println!("theta={:.6} worst linearized margin={worst:.3e}", angle.theta());
        checks.push(CheckResult::leaf(
            "theorem2",
            2,
            angle,
            a.count,
            seed,
            worst,
            1e-7,
            "spectral discretization of the operator on the Gauss grid",
        ));
        let seeds: Vec<u64> = (0..5).map(|k| seed + k).collect();
        let rows = second_variation_table(angle, a.resolution, a.modes, &seeds, a.t_step)?;
        for r in &rows {
            sv_csv.push_str(&format!(
                "{:.12},{},{:.12e},{:.12e},{:.3e}\n",
                angle.theta(),
                r.seed,
                r.formula,
                r.finite_difference,
                r.difference
            ));
        }
        let dev = rows.iter().map(|r| r.difference).fold(0.0, f64::max);
        println!("theta={:.6} second variation vs finite differences: max |diff|={dev:.3e}", angle.theta());
        checks.push(CheckResult::leaf(
            "second_variation",
            2,
            angle,
            rows.len(),
            seed,
            -dev,
            sv_tol,
            "five-point second difference of the product",
        ));
        tables.insert(format!("theorem2_theta{:.6}", angle.theta()), json!(margins));
        tables.insert(format!("second_variation_theta{:.6}", angle.theta()), json!(rows));
    }
    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        print_check(c);
    }
    let config = json!({
        "command": "linearized",
        "theta": thetas.iter().map(|t| t.theta()).collect::<Vec<_>>(),
        "modes": a.modes,
        "seed": seed,
        "resolution": a.resolution,
        "count": a.count,
        "t_step": a.t_step,
    });
    if fmts.iter().any(|f| f == "svg") {
        let bars: Vec<(String, f64)> = checks
            .iter()
            .map(|c| (format!("{} θ={:.3}", c.name, c.theta), c.slack()))
            .collect();
        write_atomic(&a.common.out, "linearized_margins.svg", &bars_svg("slack (margin + tol) / tol", &bars))?;
    }
    emit(
        &a.common,
        &fmts,
        "linearized",
        config,
        checks,
        tables,
        &[("linearized.csv", margin_csv), ("second_variation.csv", sv_csv)],
    )?;
    Ok(passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_aliases() {
        assert_eq!(parse_theta("pi/3").unwrap(), PI / 3.0);
        assert_eq!(parse_theta("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_theta("2pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_theta("0.75").unwrap(), 0.75);
        assert!(parse_theta("60deg").is_err());
    }
}
