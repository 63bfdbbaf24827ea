//! Scenario execution: geodesics, transverse data, profiles, then checks,
//! with a deterministic JSON report, CSV profiles and an exit code.
//!
//! Geodesics fan out over the rayon pool; report assembly is sequential
//! and keeps the scenario order, so the JSON does not depend on the number
//! of workers.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::comparison::{check_bishop, check_bishop_gromov, check_bonnet_myers, check_laplacian_comparison, profile_from, radial_data, BishopProfile, Bundle, DEFAULT_TOL};
use crate::curvature::{matrix_lemma_check, TransverseData};
use crate::error::Result;
use crate::lagrangian::{ChartedSpace, Signature};
use crate::lorentz::{check_lorentz_laplacian, check_raychaudhuri, check_spacetime_bishop_myers, hessian_symmetry_check, lagrange_from, legendre_check, sclv_volume_check, LagrangeTensorData};
use crate::report::{write_csv, CheckReport, ReportParams, Verdict};
use crate::scenario::{CheckName, CheckSpec, Scenario};
use crate::tensor::{sample_admissible, validate_homogeneity};
use crate::weighted::{epsilon_bound, monotonicity_check, ComparisonParams, NValue};

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Output directory; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Tolerance for checks without a per-check override.
    pub tol: Option<f64>,
    /// Replaces the scenario seed.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub space: String,
    pub dim: usize,
    pub signature: Signature,
    pub seed: u64,
    pub params: ReportParams,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub assumptions: Vec<String>,
    pub exit_code: i32,
    pub checks: Vec<CheckReport>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Full-resolution check reports (the JSON keeps capped grids).
    pub full: Vec<CheckReport>,
    pub json: String,
    pub exit_code: i32,
    pub written: Vec<PathBuf>,
}

/// 3 on numerical failure, else 2 on a rejected hypothesis, else 1 on a
/// failed check, else 0.
pub fn exit_code(reports: &[CheckReport]) -> i32 {
    let has = |v: Verdict| reports.iter().any(|r| r.verdict == v);
    if has(Verdict::Error) {
        3
    } else if has(Verdict::Rejected) {
        2
    } else if has(Verdict::Fail) {
        1
    } else {
        0
    }
}

/// Re-judges a fixed-tolerance report against an explicit override.
fn retolerate(mut r: CheckReport, tol: f64) -> CheckReport {
    if matches!(r.verdict, Verdict::Pass | Verdict::Fail) {
        let m = r.max_violation.0;
        r.verdict = if m <= tol { Verdict::Pass } else { Verdict::Fail };
    }
    r.tolerance = tol;
    r
}

/// Per-geodesic data shared by several checks.
struct Stage {
    data: Vec<std::result::Result<TransverseData, String>>,
    profiles: Vec<std::result::Result<BishopProfile, String>>,
    lagrange: Vec<std::result::Result<LagrangeTensorData, String>>,
}

fn stage(space: &ChartedSpace, params: &ComparisonParams, bundle: Option<&Bundle>, checks: &[CheckSpec]) -> Stage {
    let wants = |names: &[CheckName]| checks.iter().any(|c| names.contains(&c.name));
    let mut st = Stage { data: Vec::new(), profiles: Vec::new(), lagrange: Vec::new() };
    let Some(b) = bundle else { return st };
    if !wants(&[CheckName::MatrixLemma, CheckName::Conjugate, CheckName::Bishop, CheckName::Raychaudhuri]) {
        return st;
    }
    st.data = b
        .directions
        .par_iter()
        .map(|dir| radial_data(space, &b.origin, dir, b.horizon).map_err(|e| e.to_string()))
        .collect();
    if wants(&[CheckName::Bishop]) {
        st.profiles = st
            .data
            .par_iter()
            .map(|td| match td {
                Ok(td) => profile_from(space, td.clone(), params).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            })
            .collect();
    }
    if wants(&[CheckName::Raychaudhuri]) && space.is_lorentzian() {
        st.lagrange = st
            .data
            .par_iter()
            .map(|td| match td {
                Ok(td) => lagrange_from(space, td.clone(), params.eps).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            })
            .collect();
    }
    st
}

/// The `N` values of the monotonicity chain that are admissible here.
fn default_chain(space: &ChartedSpace) -> Vec<NValue> {
    let n = space.ricci_n() as f64;
    let candidates = match space.signature() {
        Signature::Positive => [n, n + 2.0, f64::INFINITY, 0.0, 1.0, -1.0],
        Signature::Lorentzian => [n, n + 2.0, f64::INFINITY, -1.0, 0.0, -2.0],
    };
    candidates
        .into_iter()
        .map(NValue::from_f64)
        .filter(|&nv| epsilon_bound(space.dim(), space.signature(), nv).is_ok())
        .collect()
}

fn conjugate_check(data: &[std::result::Result<TransverseData, String>], spec: &CheckSpec, tol: f64, horizon: f64) -> CheckReport {
    const NAME: &str = "conjugate";
    let (mut grid, mut res) = (Vec::new(), Vec::new());
    let mut found = Vec::new();
    for (k, td) in data.iter().enumerate() {
        let td = match td {
            Ok(td) => td,
            Err(e) => return CheckReport::numerical_error(NAME, format!("geodesic {k}: {e}")),
        };
        let t0 = td.singular_at.filter(|t| *t <= td.horizon());
        grid.push(k as f64);
        res.push(match (spec.expected, spec.expect_none, t0) {
            (Some(want), _, Some(t0)) => (t0 - want).abs(),
            (Some(_), _, None) => f64::INFINITY,
            (None, true, Some(_)) => f64::INFINITY,
            _ => 0.0,
        });
        found.push(t0);
    }
    let mut r = CheckReport::from_residuals(NAME, grid, res, tol);
    for (k, t0) in found.iter().enumerate() {
        r = match t0 {
            Some(t) => r.value(&format!("t0[{k}]"), *t),
            None => r.note(format!("[{k}] no conjugate point up to t = {horizon}")),
        };
    }
    if let Some(e) = spec.expected {
        r = r.value("expected", e);
    }
    r
}

fn merged<T>(name: &str, items: &[std::result::Result<T, String>], tol: f64, f: impl Fn(&T) -> CheckReport) -> CheckReport {
    let parts: Vec<CheckReport> = items
        .iter()
        .enumerate()
        .map(|(k, it)| match it {
            Ok(x) => f(x),
            Err(e) => CheckReport::numerical_error(name, format!("geodesic {k}: {e}")),
        })
        .collect();
    CheckReport::merge(name, &parts, tol)
}

fn run_check(sc: &Scenario, space: &ChartedSpace, params: &ComparisonParams, bundle: Option<&Bundle>, st: &Stage, spec: &CheckSpec, opts: &RunOptions, seed: u64) -> CheckReport {
    let tol = spec.tol.or(opts.tol).unwrap_or(DEFAULT_TOL);
    let seed = spec.seed.unwrap_or(seed);
    let fixed = |r: CheckReport| match spec.tol {
        Some(t) => retolerate(r, t),
        None => r,
    };
    let no_bundle = || CheckReport::rejected(spec.name.as_str(), "the check needs a geodesic bundle".into());
    match spec.name {
        CheckName::Homogeneity => fixed(validate_homogeneity(space, spec.samples.unwrap_or(200), seed)),
        CheckName::MatrixLemma => fixed(merged("matrix_lemma", &st.data, crate::curvature::LEMMA_TOL, |td| matrix_lemma_check(space, td))),
        CheckName::Conjugate => match bundle {
            Some(b) => conjugate_check(&st.data, spec, tol, b.horizon),
            None => no_bundle(),
        },
        CheckName::Bishop => merged("bishop", &st.profiles, tol, |p| check_bishop(p, tol)),
        CheckName::BonnetMyers => match bundle {
            Some(b) => check_bonnet_myers(space, params, b, tol),
            None => no_bundle(),
        },
        CheckName::Laplacian => match bundle {
            Some(b) => check_laplacian_comparison(space, params, b, tol),
            None => no_bundle(),
        },
        CheckName::BishopGromov => match bundle {
            Some(b) => {
                let quad = spec.quadrature.clone().unwrap_or_default().indicatrix();
                check_bishop_gromov(space, params, &b.origin, spec.r.unwrap_or(0.0), spec.R.unwrap_or(0.0), &quad, &b.directions, tol)
            }
            None => no_bundle(),
        },
        CheckName::Monotonicity => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..spec.samples.unwrap_or(500)).map(|_| sample_admissible(space, &mut rng, 0.8)).collect();
            let chain = spec.n_list.clone().unwrap_or_else(|| default_chain(space));
            fixed(monotonicity_check(space, &samples, &chain))
        }
        CheckName::Raychaudhuri => {
            if !space.is_lorentzian() {
                return CheckReport::rejected("raychaudhuri", "the Raychaudhuri check needs a spacetime".into());
            }
            merged("raychaudhuri", &st.lagrange, tol, |d| check_raychaudhuri(space, d, params, tol))
        }
        CheckName::SpacetimeBonnetMyers => match bundle {
            Some(b) => check_spacetime_bishop_myers(space, params, b, tol),
            None => no_bundle(),
        },
        CheckName::LorentzLaplacian => match bundle {
            Some(b) => check_lorentz_laplacian(space, params, b, tol),
            None => no_bundle(),
        },
        CheckName::SclvBishopGromov => {
            let Some(sector) = spec.sector.as_ref().and_then(|s| sc.sector(s, space)) else {
                return CheckReport::rejected("sclv_bishop_gromov", "the check needs a sector with an origin".into());
            };
            let quad = spec.quadrature.clone().unwrap_or_default().sector();
            sclv_volume_check(space, params, &sector, spec.r.unwrap_or(0.0), spec.R.unwrap_or(0.0), &quad, tol)
        }
        CheckName::Legendre => fixed(legendre_check(space, spec.samples.unwrap_or(1000), seed)),
        CheckName::HessianSymmetry => {
            let (Some(f), Some(points)) = (&spec.function, &spec.points) else {
                return CheckReport::rejected("hessian_symmetry", "the check needs a function and points".into());
            };
            let parts: Vec<CheckReport> = points.iter().map(|x| hessian_symmetry_check(space, f, x)).collect();
            fixed(CheckReport::merge("hessian_symmetry", &parts, DEFAULT_TOL))
        }
    }
}

fn csv_rows(r: &CheckReport) -> Vec<Vec<f64>> {
    r.grid.iter().zip(&r.residuals).map(|(g, x)| vec![g.0, x.0]).collect()
}

fn write_profiles(dir: &Path, st: &Stage, reports: &[CheckReport], written: &mut Vec<PathBuf>) -> Result<()> {
    for (k, p) in st.profiles.iter().enumerate() {
        let Ok(p) = p else { continue };
        let rows: Vec<Vec<f64>> = (0..p.t.len())
            .map(|i| vec![p.t[i], p.tau[i], p.h[i], p.h1[i], p.dh1[i], p.ddh1[i], p.ricci_along[i], if p.valid[i] { 1.0 } else { 0.0 }])
            .collect();
        let header = ["t", "tau", "h", "h1", "dh1", "ddh1", "ricci_n", "valid"].map(String::from);
        let path = dir.join(format!("bishop_profile_{k}.csv"));
        write_csv(&path, &header, &rows)?;
        written.push(path);
    }
    for (k, d) in st.lagrange.iter().enumerate() {
        let Ok(d) = d else { continue };
        let rows: Vec<Vec<f64>> = (0..d.t.len())
            .map(|i| {
                let t = d.t[i];
                vec![t, d.weight.phi_at(t), d.theta[i], d.theta_eps[i], (&d.sigma_eps[i] * &d.sigma_eps[i]).trace()]
            })
            .collect();
        let header = ["t", "tau", "theta", "theta_eps", "shear2_eps"].map(String::from);
        let path = dir.join(format!("raychaudhuri_profile_{k}.csv"));
        write_csv(&path, &header, &rows)?;
        written.push(path);
    }
    for (i, r) in reports.iter().enumerate() {
        let path = dir.join(format!("{i:02}_{}.csv", r.name));
        write_csv(&path, &["grid".to_string(), "residual".to_string()], &csv_rows(r))?;
        written.push(path);
    }
    Ok(())
}

/// Runs a validated scenario. Reports are written even when checks fail;
/// only I/O errors and invalid scenarios surface as `Err`.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let space = sc.build_space()?;
    let params = sc.comparison_params(&space)?;
    let bundle = sc.bundle(&space)?;
    let seed = opts.seed.unwrap_or(sc.seed);
    let st = stage(&space, &params, bundle.as_ref(), &sc.checks);
    let full: Vec<CheckReport> = sc
        .checks
        .iter()
        .map(|spec| {
            let mut r = run_check(sc, &space, &params, bundle.as_ref(), &st, spec, opts, seed).with_scenario(&sc.id);
            if r.params.is_none() {
                r = r.with_params(&params);
            }
            r
        })
        .collect();
    let code = exit_code(&full);
    let report = RunReport {
        scenario: sc.id.clone(),
        space: space.name.clone(),
        dim: space.dim(),
        signature: space.signature(),
        seed,
        params: (&params).into(),
        assumptions: sc.assumptions.clone(),
        exit_code: code,
        checks: full.iter().map(CheckReport::capped).collect(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)? + "\n";
    let mut written = Vec::new();
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(sc.output.report.clone().unwrap_or_else(|| PathBuf::from(format!("{}.json", sc.id))));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &json)?;
        written.push(path);
        let profiles = dir.join(sc.output.profiles.clone().unwrap_or_else(|| PathBuf::from(format!("{}_profiles", sc.id))));
        write_profiles(&profiles, &st, &full, &mut written)?;
    }
    Ok(RunOutcome { report, full, json, exit_code: code, written })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn report(v: Verdict) -> CheckReport {
        let mut r = CheckReport::from_residuals("x", vec![], vec![], 1.0);
        r.verdict = v;
        r
    }

    #[test]
    fn exit_code_precedence() {
        use Verdict::*;
        assert_eq!(exit_code(&[report(Pass)]), 0);
        assert_eq!(exit_code(&[report(Pass), report(Fail)]), 1);
        assert_eq!(exit_code(&[report(Fail), report(Rejected)]), 2);
        assert_eq!(exit_code(&[report(Rejected), report(Error), report(Fail)]), 3);
        assert_eq!(exit_code(&[]), 0);
    }

    #[test]
    fn sphere_bonnet_myers_scenario() {
        let sc = parse_scenario(
            r#"{
                "id": "sphere_bm",
                "space": {"zoo": "sphere", "params": {"n": 2}},
                "params": {"N": 2, "eps": 1, "K": 1, "a": 1, "b": 1},
                "bundle": {"origin": [0.6, 0.8], "directions": {"grid": 3}, "horizon": 3.3},
                "checks": ["bonnet_myers", {"name": "conjugate", "expected": 3.141592653589793}]
            }"#,
        )
        .unwrap();
        let out = run(&sc, &RunOptions::default()).unwrap();
        assert_eq!(out.exit_code, 0, "{}", out.json);
        let t0 = out.full[0].get("t0[0]").unwrap();
        assert!((t0 - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn curvature_gate_rejects() {
        let sc = parse_scenario(
            r#"{
                "id": "sphere_bm_k2",
                "space": {"zoo": "sphere", "params": {"n": 2}},
                "params": {"N": 2, "eps": 1, "K": 2, "a": 1, "b": 1},
                "bundle": {"origin": [0, 0], "directions": {"grid": 2}, "horizon": 3.3},
                "checks": ["bonnet_myers"]
            }"#,
        )
        .unwrap();
        assert_eq!(run(&sc, &RunOptions::default()).unwrap().exit_code, 2);
    }
}
