//! `finslercomp`: run comparison-geometry scenarios from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use finslercomp::lorentz::{classify, dual_lagrangian, is_polar, legendre, legendre_inverse, legendre_preimages_2d, CausalKind};
use finslercomp::runner::{run, RunOptions, RunOutcome};
use finslercomp::scenario::{load_scenario, BundleSpec, CheckName, CheckSpec, DirectionSpec, OutputSpec, ParamSpec, Scenario, SpaceSpec};
use finslercomp::weighted::NValue;
use finslercomp::zoo::{build_zoo, Warp, ZooParams, ZOO};
use serde_json::json;

/// Exit status for a scenario that fails to load or validate.
const INVALID_SCENARIO: u8 = 2;

#[derive(Parser)]
#[command(name = "finslercomp", version, about = "Numerical comparison geometry for weighted Finsler manifolds and spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its JSON report and CSV profiles.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Tolerance for checks without a per-check override.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// The built-in spaces.
    Zoo {
        #[command(subcommand)]
        command: ZooCommand,
    },
    /// One check on a zoo space, report on stdout.
    Check(CheckArgs),
    /// Legendre transform of a unit vector at an angle in a planar space.
    Legendre {
        #[arg(long, default_value = "beem")]
        space: String,
        #[arg(long)]
        k: Option<u32>,
        /// Angle in radians.
        #[arg(long)]
        angle: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
}

#[derive(Subcommand)]
enum ZooCommand {
    List,
}

#[derive(Args)]
#[allow(non_snake_case)]
struct CheckArgs {
    /// Check name, e.g. bishop, bonnet_myers, raychaudhuri.
    name: String,
    #[arg(long)]
    space: String,
    /// Dimension, or spatial dimension for spacetimes.
    #[arg(long)]
    n: Option<usize>,
    /// Randers drift.
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = parse_warp)]
    warp: Option<Warp>,
    #[arg(long)]
    k: Option<u32>,
    /// Effective dimension; a number or "inf". Defaults to the space's n.
    #[arg(long = "N", allow_hyphen_values = true)]
    N: Option<String>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long = "K", default_value_t = 0.0, allow_hyphen_values = true)]
    K: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long)]
    b: Option<f64>,
    /// Comma-separated origin; defaults to the chart origin.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    origin: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    directions: usize,
    #[arg(long, default_value_t = 2.0)]
    horizon: f64,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long = "R")]
    R: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write report and profiles here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_warp(s: &str) -> Result<Warp, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown warp {s:?}; expected cos, cosh or exp"))
}

/// Caps the rayon pool at `FINSLERCOMP_THREADS` when set.
fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FINSLERCOMP_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("FINSLERCOMP_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn summarize(out: &RunOutcome) {
    for c in &out.report.checks {
        let verdict = serde_json::to_string(&c.verdict).unwrap_or_default();
        eprintln!("{:<24} {:<10} max_violation={:.3e} tol={:e}", c.name, verdict.trim_matches('"'), c.max_violation.0, c.tolerance);
    }
}

fn cmd_run(path: PathBuf, out: PathBuf, tol: Option<f64>, seed: Option<u64>) -> anyhow::Result<u8> {
    let sc = match load_scenario(&path) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Ok(INVALID_SCENARIO);
        }
    };
    let outcome = run(&sc, &RunOptions { out_dir: Some(out), tol, seed })?;
    summarize(&outcome);
    if let Some(p) = outcome.written.first() {
        eprintln!("report: {}", p.display());
    }
    Ok(outcome.exit_code as u8)
}

fn cmd_zoo_list() {
    for (name, about) in ZOO {
        println!("{name:<28} {about}");
    }
}

fn cmd_check(a: CheckArgs) -> anyhow::Result<u8> {
    let Some(name) = CheckName::parse(&a.name) else {
        let names: Vec<&str> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
        bail!("unknown check {:?}; available: {}", a.name, names.join(", "));
    };
    let zoo = ZooParams { n: a.n, b: a.drift, lambda: a.lambda, warp: a.warp, k: a.k };
    let space = build_zoo(&a.space, &zoo)?;
    let n_eff = match &a.N {
        Some(s) => NValue::from_f64(s.trim().parse::<f64>().with_context(|| format!("--N {s:?} is not a number or inf"))?),
        None => NValue::Finite(space.ricci_n() as f64),
    };
    let origin = a.origin.unwrap_or_else(|| vec![0.0; space.dim()]);
    let mut spec = CheckSpec::named(name);
    spec.tol = a.tol;
    spec.samples = a.samples;
    spec.r = a.r;
    spec.R = a.R;
    let sc = Scenario {
        id: format!("{}_{}", a.space, name.as_str()),
        space: SpaceSpec { zoo: Some(a.space.clone()), params: zoo, ..Default::default() },
        weight: None,
        params: ParamSpec { N: n_eff, eps: a.eps, K: a.K, a: a.a, b: a.b },
        bundle: Some(BundleSpec { origin, directions: DirectionSpec::Grid(a.directions.max(1)), horizon: a.horizon }),
        checks: vec![spec],
        output: OutputSpec::default(),
        seed: a.seed,
        assumptions: Vec::new(),
    };
    if let Err(e) = sc.validate() {
        eprintln!("{e}");
        return Ok(INVALID_SCENARIO);
    }
    let outcome = run(&sc, &RunOptions { out_dir: a.out, tol: None, seed: None })?;
    print!("{}", outcome.json);
    summarize(&outcome);
    Ok(outcome.exit_code as u8)
}

fn cmd_legendre(space: String, k: Option<u32>, angle: f64, radius: f64) -> anyhow::Result<u8> {
    let s = build_zoo(&space, &ZooParams { k, ..Default::default() })?;
    if s.dim() != 2 || !s.is_lorentzian() {
        bail!("legendre expects a planar spacetime (e.g. beem)");
    }
    let x = [0.0, 0.0];
    let v = [radius * angle.cos(), radius * angle.sin()];
    let class = classify(&s, &s.time_orientation(), &x, &v);
    let omega = legendre(&s, &x, &v)?;
    let preimages = legendre_preimages_2d(&s, &x, &omega)?;
    let mut out = json!({
        "space": s.name,
        "angle": angle,
        "v": v,
        "lagrangian": s.lagrangian_at(&x, &v),
        "causal": format!("{:?}", class.kind).to_lowercase(),
        "future": class.future,
        "omega": omega,
        "preimages": preimages,
    });
    let minus: Vec<f64> = omega.iter().map(|c| -c).collect();
    if class.kind == CausalKind::Timelike && class.future {
        let back = legendre_inverse(&s, &x, &omega)?;
        out["inverse"] = json!(back);
        out["dual_lagrangian"] = json!(dual_lagrangian(&s, &x, &omega)?);
    }
    out["polar"] = json!(is_polar(&s, &x, &omega) || is_polar(&s, &x, &minus));
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { scenario, out, tol, seed } => cmd_run(scenario, out, tol, seed),
        Command::Zoo { command: ZooCommand::List } => {
            cmd_zoo_list();
            Ok(0)
        }
        Command::Check(a) => cmd_check(a),
        Command::Legendre { space, k, angle, radius } => cmd_legendre(space, k, angle, radius),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
