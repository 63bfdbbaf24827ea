//! Comparison theorems on weighted Finsler manifolds: the Bishop
//! inequality, Bonnet–Myers (with the deformed-length bound), Laplacian
//! comparison and Bishop–Gromov, each checked along explicit geodesics.
//!
//! Everything is expressed through the transverse data of a unit-speed
//! geodesic: `det A = (det Y)²` and `tr B = tr(Y⁻¹Ẏ)`. The profile
//! `h = e^{−cψ}(det A)^{c/2}` and its reparametrization `h₁ = h∘φ⁻¹` are
//! shared by all checks; the Lorentzian checks reuse them with `J = Y`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::curvature::{transverse_data, transverse_data_with, TransverseData, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::geodesic::{integrate_geodesic_partial, unit_speed};
use crate::lagrangian::{ChartedSpace, Lagrangian};
use crate::quadrature::{gauss_legendre, halton, integrate_gk};
use crate::report::{CheckReport, Verdict};
use crate::tensor::{finsler_norm, raw_metric};
use crate::weighted::{combine_ricci, ComparisonParams, WeightAlongGeodesic};

/// Default absolute tolerance of the theorem checks.
pub const DEFAULT_TOL: f64 = 1e-3;

/// Fraction of the horizon excluded near `τ = 0`, where `h₁″` is singular.
pub const SMALL_TAU_FRACTION: f64 = 0.05;

/// `(s_κ(t), s′_κ(t))`, the solution of `s″ + κs = 0`, `s(0) = 0`, `s′(0) = 1`.
pub fn comparison_s(kappa: f64, t: f64) -> Result<(f64, f64)> {
    if kappa > 0.0 {
        let r = kappa.sqrt();
        let max = PI / r;
        if !(t >= 0.0 && t <= max * (1.0 + 1e-12)) {
            return Err(Error::ComparisonDomain { t, max });
        }
        Ok(((r * t).sin() / r, (r * t).cos()))
    } else if kappa == 0.0 {
        Ok((t, 1.0))
    } else {
        let r = (-kappa).sqrt();
        Ok(((r * t).sinh() / r, (r * t).cosh()))
    }
}

/// `π/√κ` for `κ > 0`, infinite otherwise.
pub fn comparison_horizon(kappa: f64) -> f64 {
    if kappa > 0.0 {
        PI / kappa.sqrt()
    } else {
        f64::INFINITY
    }
}

/// A family of geodesics from one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub origin: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub horizon: f64,
}

/// The Bishop profile of one unit-speed geodesic.
#[derive(Clone, Debug)]
pub struct BishopProfile {
    pub td: TransverseData,
    pub weight: WeightAlongGeodesic,
    pub params: ComparisonParams,
    pub t: Vec<f64>,
    pub tau: Vec<f64>,
    pub h: Vec<f64>,
    pub h1: Vec<f64>,
    pub dh1: Vec<f64>,
    pub ddh1: Vec<f64>,
    /// `|h₁″(δ) − h₁″(δ/2)|`, the difference-step error estimate.
    pub ddh1_err: Vec<f64>,
    /// `Ric_N(η̇(t))`.
    pub ricci_unit: Vec<f64>,
    /// `Ric_N((η∘φ⁻¹)′(τ)) = Ric_N(η̇)/φ′²`.
    pub ricci_along: Vec<f64>,
    /// Whether the difference stencil at the sample stays inside `(0, t₀)`.
    pub valid: Vec<bool>,
    pub conjugate: Option<f64>,
}

/// `h`, `h′` and `tr B − ψ′` at any `t` of the horizon.
fn h_at<L: Lagrangian>(space: &ChartedSpace<L>, td: &TransverseData, w: &WeightAlongGeodesic, c: f64, t: f64) -> (f64, f64, f64) {
    let s = td.sample(space, t);
    let trb = s.trace_b().unwrap_or(f64::NAN);
    let [psi, dpsi, _] = w.psi_at(t);
    let h = (-c * psi).exp() * s.det_y().abs().powf(c);
    (h, h * c * (trb - dpsi), trb - dpsi)
}

/// `d/dt (h′/φ′)` by a five-point stencil of width `δ`.
fn dg_dt<L: Lagrangian>(space: &ChartedSpace<L>, td: &TransverseData, w: &WeightAlongGeodesic, c: f64, t: f64, delta: f64) -> f64 {
    let g = |s: f64| h_at(space, td, w, c, s).1 / w.dphi_at(s);
    (g(t - 2.0 * delta) - 8.0 * g(t - delta) + 8.0 * g(t + delta) - g(t + 2.0 * delta)) / (12.0 * delta)
}

/// Unit-speed version of `v` (`F(v) = 1` in either signature).
pub fn normalize<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    unit_speed(space, x, v)
}

/// Integrates the geodesic and its transverse data over `horizon`,
/// stopping early at a chart exit.
pub fn radial_data<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64], horizon: f64) -> Result<TransverseData> {
    let v = normalize(space, x, v)?;
    let (path, stopped) = integrate_geodesic_partial(space, x, &v, horizon, 1e-10)?;
    if let Some(e) = stopped {
        return Err(e);
    }
    transverse_data(space, &path)
}

/// Builds the profile along the geodesic from `x` in direction `v`.
pub fn bishop_profile<L: Lagrangian>(
    space: &ChartedSpace<L>,
    x: &[f64],
    v: &[f64],
    horizon: f64,
    params: &ComparisonParams,
) -> Result<BishopProfile> {
    let td = radial_data(space, x, v, horizon)?;
    profile_from(space, td, params)
}

pub fn profile_from<L: Lagrangian>(space: &ChartedSpace<L>, td: TransverseData, params: &ComparisonParams) -> Result<BishopProfile> {
    let weight = WeightAlongGeodesic::new(space, &td.path, params.eps, td.grid.len())?;
    let c = params.c;
    let n = params.ricci_n();
    let conjugate = td.singular_at;
    let limit = conjugate.unwrap_or(td.horizon()).min(td.horizon());
    let len = td.grid.len();
    let mut p = BishopProfile {
        t: td.grid.clone(),
        tau: Vec::with_capacity(len),
        h: Vec::with_capacity(len),
        h1: Vec::with_capacity(len),
        dh1: Vec::with_capacity(len),
        ddh1: Vec::with_capacity(len),
        ddh1_err: Vec::with_capacity(len),
        ricci_unit: Vec::with_capacity(len),
        ricci_along: Vec::with_capacity(len),
        valid: Vec::with_capacity(len),
        conjugate,
        td,
        weight,
        params: params.clone(),
    };
    for (k, &t) in p.t.iter().enumerate() {
        let (h, dh, _) = h_at(space, &p.td, &p.weight, c, t);
        let dphi = p.weight.dphi_at(t);
        // h₁ ~ t^c near 0, so for c < 1 the stencil has to shrink with t
        let delta = (0.01 * limit.max(1.0)).min(0.01).min(t / 40.0);
        let valid = t + 2.0 * delta < limit && t - 2.0 * delta > 0.0 && conjugate.is_none_or(|t0| t < t0);
        let (dd, err) = if valid {
            let a = dg_dt(space, &p.td, &p.weight, c, t, delta) / dphi;
            let b = dg_dt(space, &p.td, &p.weight, c, t, 0.5 * delta) / dphi;
            (b, (a - b).abs())
        } else {
            (f64::NAN, f64::NAN)
        };
        let ric = p.td.curvature(space, &p.td.samples[k])?.ricci;
        let [_, d1, d2] = p.weight.psi_at(t);
        let ric_n = combine_ricci(ric, d1, d2, params.n, n);
        p.tau.push(p.weight.reparam.phi[k + 1]);
        p.h.push(h);
        p.h1.push(h);
        p.dh1.push(dh / dphi);
        p.ddh1.push(dd);
        p.ddh1_err.push(err);
        p.ricci_unit.push(ric_n);
        p.ricci_along.push(ric_n / (dphi * dphi));
        p.valid.push(valid);
    }
    Ok(p)
}

impl BishopProfile {
    /// `τ_max = φ(horizon)`.
    pub fn tau_max(&self) -> f64 {
        self.weight.reparam.completeness
    }

    /// Log–log slope of `h` near `0`, to compare with `c·m`.
    pub fn small_tau_slope<L: Lagrangian>(&self, space: &ChartedSpace<L>) -> f64 {
        let t1 = 1e-3 * self.td.horizon().min(1.0);
        let h = |t: f64| h_at(space, &self.td, &self.weight, self.params.c, t).0;
        (h(2.0 * t1) / h(t1)).ln() / 2f64.ln()
    }

    /// Largest relative increase of `h₁/s_{cK}` over consecutive samples
    /// with `τ` inside the model horizon.
    pub fn ratio_increase(&self) -> f64 {
        let kappa = self.params.c * self.params.k;
        let cap = comparison_horizon(kappa) * (1.0 - 1e-2);
        let mut prev: Option<f64> = None;
        let mut worst = 0.0_f64;
        for k in 0..self.t.len() {
            if self.tau[k] >= cap || self.conjugate.is_some_and(|t0| self.t[k] >= t0) {
                break;
            }
            let Ok((s, _)) = comparison_s(kappa, self.tau[k]) else { break };
            let r = self.h1[k] / s;
            if let Some(p) = prev {
                worst = worst.max((r - p) / p.abs().max(1e-300));
            }
            prev = Some(r);
        }
        worst
    }

    /// Hypothesis margins on the samples: `min(Ric_N − K e^{2·rate·ψ})`
    /// relative to `max(1, |K e^{…}|)`, and the range of `e^{−rate·ψ}`.
    pub fn hypothesis_margin(&self) -> (f64, (f64, f64)) {
        let rate = self.weight.reparam.rate;
        let mut margin = f64::INFINITY;
        for (k, &t) in self.t.iter().enumerate() {
            let psi = self.weight.psi_at(t)[0];
            let rhs = self.params.k * (2.0 * rate * psi).exp();
            margin = margin.min((self.ricci_unit[k] - rhs) / rhs.abs().max(1.0));
        }
        (margin, self.weight.factor_range())
    }
}

/// Relative slack allowed when validating hypotheses by sampling.
pub const HYPOTHESIS_SLACK: f64 = 1e-6;

/// Rejects the profile if the sampled curvature bound or the declared
/// weight bounds fail.
pub fn validate_hypotheses(p: &BishopProfile, need_curvature: bool, need_a: bool, need_b: bool) -> Result<()> {
    let (margin, (lo, hi)) = p.hypothesis_margin();
    if need_curvature && margin < -HYPOTHESIS_SLACK {
        return Err(Error::Hypothesis(format!(
            "sampled Ric_N falls below K e^(4(eps-1)psi/m) by {:e} (relative)",
            -margin
        )));
    }
    if need_a && lo < p.params.a * (1.0 - HYPOTHESIS_SLACK) {
        return Err(Error::Hypothesis(format!("weight factor inf {lo} is below a = {}", p.params.a)));
    }
    if need_b {
        match p.params.b {
            Some(b) if hi > b * (1.0 + HYPOTHESIS_SLACK) => {
                return Err(Error::Hypothesis(format!("weight factor sup {hi} exceeds b = {b}")))
            }
            None => return Err(Error::Hypothesis("the bound b is required".into())),
            _ => {}
        }
    }
    Ok(())
}

fn failure_report(name: &str, e: Error) -> CheckReport {
    match e {
        Error::Hypothesis(m) => CheckReport::rejected(name, m),
        other => CheckReport::numerical_error(name, other.to_string()),
    }
}

/// Residual `h₁″ + c·h₁·Ric_N` scaled by `max(1, |h₁·Ric_N|)` for
/// `τ ≥ 0.05·τ_max` before the first conjugate point.
pub fn check_bishop(p: &BishopProfile, tol: f64) -> CheckReport {
    const NAME: &str = "bishop";
    let tau_min = SMALL_TAU_FRACTION * p.tau_max();
    if p.ricci_along.iter().zip(&p.valid).any(|(r, ok)| *ok && *r == f64::NEG_INFINITY) {
        return CheckReport::rejected(NAME, "Ric_N is -inf: N = n needs a weight that is constant along the geodesic".into())
            .with_params(&p.params);
    }
    let (mut grid, mut res) = (Vec::new(), Vec::new());
    let mut fd_err = 0.0_f64;
    for k in 0..p.t.len() {
        if !p.valid[k] || p.tau[k] < tau_min {
            continue;
        }
        let scale = (p.h1[k] * p.ricci_along[k]).abs().max(1.0);
        grid.push(p.tau[k]);
        res.push((p.ddh1[k] + p.params.c * p.h1[k] * p.ricci_along[k]) / scale);
        fd_err = fd_err.max(p.ddh1_err[k] / scale);
    }
    if grid.is_empty() {
        return CheckReport::numerical_error(NAME, "no samples inside the checked range".into());
    }
    let max_abs = res.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    let mut r = CheckReport::from_residuals(NAME, grid, res, tol)
        .with_params(&p.params)
        .value("max_abs_residual", max_abs)
        .value("difference_error", fd_err)
        .value("tau_max", p.tau_max());
    if fd_err > 0.1 * tol {
        r.verdict = Verdict::Error;
        r.notes.push(format!("second-derivative error estimate {fd_err:e} exceeds 10% of the tolerance"));
    }
    if let Some(t0) = p.conjugate {
        r = r.value("conjugate_t", t0).note("profile truncated at the first conjugate point");
    }
    r
}

/// Search horizon for conjugate points: `b·π/√(cK)` with a margin when `b`
/// is declared, the bundle horizon otherwise.
fn myers_horizon(params: &ComparisonParams, bundle: &Bundle) -> f64 {
    let t = comparison_horizon(params.c * params.k);
    match params.b {
        Some(b) => b * t * 1.02 + 0.05,
        None => bundle.horizon,
    }
}

/// For every geodesic: a conjugate point by `b·π/√(cK)`, the deformed
/// bound `φ(t₀) ≤ π/√(cK)`, and `h₁/s` non-increasing.
pub fn check_bonnet_myers<L: Lagrangian>(space: &ChartedSpace<L>, params: &ComparisonParams, bundle: &Bundle, tol: f64) -> CheckReport {
    const NAME: &str = "bonnet_myers";
    if !(params.k > 0.0) {
        return CheckReport::rejected(NAME, format!("K = {} must be positive", params.k)).with_params(params);
    }
    let model = comparison_horizon(params.c * params.k);
    let horizon = myers_horizon(params, bundle);
    let parts: Vec<CheckReport> = bundle
        .directions
        .par_iter()
        .map(|dir| {
            let p = match bishop_profile(space, &bundle.origin, dir, horizon, params) {
                Ok(p) => p,
                Err(e) => return failure_report(NAME, e),
            };
            if let Err(e) = validate_hypotheses(&p, true, false, false) {
                return failure_report(NAME, e);
            }
            if params.b.is_some() {
                if let Err(e) = validate_hypotheses(&p, false, false, true) {
                    return failure_report(NAME, e);
                }
            }
            let monotone = p.ratio_increase();
            // pass iff the increase is at most 1e-6
            let monotone_res = monotone / 1e-6 * tol;
            let mut r = match p.conjugate {
                Some(t0) => {
                    let tau0 = p.weight.phi_at(t0);
                    let mut res = vec![(tau0 - model) / model.max(1.0), monotone_res];
                    if let Some(b) = params.b {
                        res.push((t0 - b * model) / (b * model).max(1.0));
                    }
                    let grid = (0..res.len()).map(|i| i as f64).collect();
                    CheckReport::from_residuals(NAME, grid, res, tol).value("t0", t0).value("tau0", tau0)
                }
                None => {
                    let tau_end = p.tau_max();
                    let mut res = vec![(tau_end - model) / model.max(1.0), monotone_res];
                    if params.b.is_some() {
                        res.push(f64::INFINITY);
                    }
                    let grid = (0..res.len()).map(|i| i as f64).collect();
                    CheckReport::from_residuals(NAME, grid, res, tol)
                        .value("deformed_length", tau_end)
                        .note(format!("no conjugate point up to t = {horizon}; deformed length {tau_end}"))
                }
            };
            r = r.value("ratio_increase", monotone);
            r
        })
        .collect();
    let mut r = CheckReport::merge(NAME, &parts, tol).with_params(params).value("deformed_bound", model);
    if let Some(b) = params.b {
        r = r.value("bound", b * model);
    }
    r
}

/// `Δ_ψ u(η(t)) = tr B(t) − ψ′_η(t)`, the ψ-Laplacian of the distance from
/// `η(0)`, valid before the first conjugate point.
pub fn radial_laplacian<L: Lagrangian>(space: &ChartedSpace<L>, td: &TransverseData, weight: &WeightAlongGeodesic, t: f64) -> Result<f64> {
    if let Some(t0) = td.singular_at {
        if t >= t0 {
            return Err(Error::BeyondConjugate { t, t0 });
        }
    }
    let s = td.sample(space, t);
    let trb = s.trace_b().ok_or_else(|| Error::Numerical(format!("singular Jacobi matrix at t = {t}")))?;
    Ok(trb - weight.psi_at(t)[1])
}

/// The comparison bound `(1/(cρ)) s′_{cK}(u/b)/s_{cK}(u/b)`; near the zero of
/// `s′` both choices of `ρ` are evaluated and the larger is used.
pub fn laplacian_bound(params: &ComparisonParams, a: f64, b: f64, u: f64) -> Option<f64> {
    let kappa = params.c * params.k;
    let x = u / b;
    let (s, ds) = comparison_s(kappa, x).ok()?;
    if s <= 0.0 {
        return None;
    }
    let model = comparison_horizon(kappa);
    let q = ds / (params.c * s);
    if model.is_finite() && (x - 0.5 * model).abs() < 1e-3 * model {
        return Some((q / a).max(q / b));
    }
    Some(if ds >= 0.0 { q / a } else { q / b })
}

/// Intermediate bound `e^{rate·ψ} s′_{cK}(φ)/(c s_{cK}(φ))`.
pub fn deformed_laplacian_bound(params: &ComparisonParams, w: &WeightAlongGeodesic, t: f64) -> Option<f64> {
    let kappa = params.c * params.k;
    let tau = w.phi_at(t);
    let (s, ds) = comparison_s(kappa, tau).ok()?;
    if s <= 0.0 {
        return None;
    }
    Some(w.dphi_at(t) * ds / (params.c * s))
}

/// Laplacian comparison along every geodesic of the bundle: both the
/// `(a, b, ρ)` bound and the deformed bound.
pub fn check_laplacian_comparison<L: Lagrangian>(space: &ChartedSpace<L>, params: &ComparisonParams, bundle: &Bundle, tol: f64) -> CheckReport {
    const NAME: &str = "laplacian";
    let Some(b) = params.b else {
        return CheckReport::rejected(NAME, "the bounds a and b are required".into()).with_params(params);
    };
    let a = params.a;
    let parts: Vec<CheckReport> = bundle
        .directions
        .par_iter()
        .map(|dir| {
            let p = match bishop_profile(space, &bundle.origin, dir, bundle.horizon, params) {
                Ok(p) => p,
                Err(e) => return failure_report(NAME, e),
            };
            if let Err(e) = validate_hypotheses(&p, true, true, true) {
                return failure_report(NAME, e);
            }
            let t_min = SMALL_TAU_FRACTION * bundle.horizon;
            let (mut grid, mut res) = (Vec::new(), Vec::new());
            let mut slack = f64::INFINITY;
            let mut slack_deformed = f64::INFINITY;
            for &t in &p.t {
                if t < t_min {
                    continue;
                }
                let Ok(lap) = radial_laplacian(space, &p.td, &p.weight, t) else { break };
                let mut r = f64::NEG_INFINITY;
                if let Some(bd) = laplacian_bound(params, a, b, t) {
                    r = r.max((lap - bd) / bd.abs().max(1.0));
                    slack = slack.min(bd - lap);
                }
                if let Some(bd) = deformed_laplacian_bound(params, &p.weight, t) {
                    r = r.max((lap - bd) / bd.abs().max(1.0));
                    slack_deformed = slack_deformed.min(bd - lap);
                }
                if r.is_finite() {
                    grid.push(t);
                    res.push(r);
                }
            }
            if grid.is_empty() {
                return CheckReport::numerical_error(NAME, "no samples inside the model horizon".into());
            }
            CheckReport::from_residuals(NAME, grid, res, tol).value("min_slack", slack).value("min_slack_deformed", slack_deformed)
        })
        .collect();
    CheckReport::merge(NAME, &parts, tol).with_params(params)
}

/// Quadrature over the indicatrix `U_xM`: Euclidean-sphere parameters mapped
/// by `u ↦ u/F(u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndicatrixQuadrature {
    /// Gauss–Legendre nodes in `cos θ` (`n = 3`).
    pub polar: usize,
    /// Trapezoid nodes in the azimuth (`n = 2, 3`).
    pub azimuthal: usize,
    /// Halton points in the cube (`n > 3`).
    pub points: usize,
    /// Accepted relative error estimate.
    pub rtol: f64,
}

impl Default for IndicatrixQuadrature {
    fn default() -> Self {
        IndicatrixQuadrature { polar: 8, azimuthal: 24, points: 2048, rtol: 0.05 }
    }
}

/// Density of the measure `Ξ` induced by `g_v` on the indicatrix, with
/// respect to the Euclidean unit sphere, at the Euclidean unit vector `u`.
pub fn indicatrix_density<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], u: &[f64]) -> Result<f64> {
    let n = u.len();
    let f = finsler_norm(space, x, u)?;
    let g = raw_metric(space, x, u);
    let gu: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[(i, j)] * u[j]).sum()).collect();
    // tangent basis of the Euclidean sphere at u
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let mut w: Vec<f64> = e.iter().zip(u).map(|(a, b)| a - u[k] * b).collect();
        for b in &basis {
            let c: f64 = w.iter().zip(b).map(|(p, q)| p * q).sum();
            w.iter_mut().zip(b).for_each(|(p, q)| *p -= c * q);
        }
        let norm = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-6 && basis.len() < n - 1 {
            basis.push(w.iter().map(|c| c / norm).collect());
        }
    }
    // d(u/F) = w/F − u (∇F·w)/F², with ∇F = g u / F
    let jac: Vec<Vec<f64>> = basis
        .iter()
        .map(|w| {
            let dfw: f64 = gu.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / f;
            (0..n).map(|i| w[i] / f - u[i] * dfw / (f * f)).collect()
        })
        .collect();
    let m = n - 1;
    let mut gram = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for p in 0..n {
                for q in 0..n {
                    s += jac[i][p] * g[(p, q)] * jac[j][q];
                }
            }
            gram[(i, j)] = s;
        }
    }
    Ok(gram.determinant().abs().sqrt())
}

/// Nodes `u` on the Euclidean unit sphere with weights, plus a coarse
/// subset weighting used for the error estimate.
fn sphere_nodes(n: usize, quad: &IndicatrixQuadrature) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (mut nodes, mut w, mut coarse) = (Vec::new(), Vec::new(), Vec::new());
    let na = quad.azimuthal.max(4);
    match n {
        2 => {
            for k in 0..na {
                let th = 2.0 * PI * k as f64 / na as f64;
                nodes.push(vec![th.cos(), th.sin()]);
                w.push(2.0 * PI / na as f64);
                coarse.push(if k % 2 == 0 { 4.0 * PI / na as f64 } else { 0.0 });
            }
        }
        3 => {
            let (z, wz) = gauss_legendre(quad.polar.max(2));
            for (zi, wi) in z.iter().zip(&wz) {
                let r = (1.0 - zi * zi).sqrt();
                for k in 0..na {
                    let th = 2.0 * PI * k as f64 / na as f64;
                    nodes.push(vec![r * th.cos(), r * th.sin(), *zi]);
                    w.push(wi * 2.0 * PI / na as f64);
                    coarse.push(if k % 2 == 0 { wi * 4.0 * PI / na as f64 } else { 0.0 });
                }
            }
        }
        _ => {
            // ∫_S f dσ = n ∫_ball f(y/|y|) dy, sampled on the cube [−1, 1]^n
            let total = quad.points.max(16);
            let cube = 2f64.powi(n as i32);
            for k in 1..=total {
                let y: Vec<f64> = halton(k, n).iter().map(|c| 2.0 * c - 1.0).collect();
                let r = y.iter().map(|c| c * c).sum::<f64>().sqrt();
                if r <= 1.0 && r > 1e-3 {
                    nodes.push(y.iter().map(|c| c / r).collect());
                    w.push(n as f64 * cube / total as f64);
                    coarse.push(if k <= total / 2 { 2.0 * n as f64 * cube / total as f64 } else { 0.0 });
                }
            }
        }
    }
    (nodes, w, coarse)
}

/// Volumes of forward balls of several radii and a relative error estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeEstimate {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub error: f64,
}

/// `m(B⁺(x, r))` for each `r` by quadrature over the indicatrix of
/// `∫₀^{min(r, t_conj)} e^{−ψ_η}√det A dt`.
pub fn ball_volumes<L: Lagrangian>(space: &ChartedSpace<L>, origin: &[f64], radii: &[f64], quad: &IndicatrixQuadrature) -> Result<VolumeEstimate> {
    let n = space.dim();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let (nodes, w, coarse) = sphere_nodes(n, quad);
    let per_dir: Vec<Result<(f64, Vec<f64>)>> = nodes
        .par_iter()
        .map(|u| {
            let xi = indicatrix_density(space, origin, u)?;
            let f = finsler_norm(space, origin, u)?;
            let v: Vec<f64> = u.iter().map(|c| c / f).collect();
            let (path, _) = integrate_geodesic_partial(space, origin, &v, r_max, 1e-10)?;
            let td = transverse_data_with(space, &path, DEFAULT_SAMPLES, 1e-10)?;
            let weight = WeightAlongGeodesic::new(space, &td.path, 1.0, td.grid.len())?;
            let end = td.horizon().min(td.singular_at.unwrap_or(f64::INFINITY));
            let density = |t: f64| {
                let s = td.sample(space, t);
                (-weight.psi_at(t)[0]).exp() * s.det_y().abs()
            };
            let mut vols = Vec::with_capacity(radii.len());
            for &r in radii {
                vols.push(integrate_gk(density, 0.0, r.min(end), 1e-9)?);
            }
            Ok((xi, vols))
        })
        .collect();
    let mut volumes = vec![0.0; radii.len()];
    let mut coarse_vol = vec![0.0; radii.len()];
    for (k, item) in per_dir.into_iter().enumerate() {
        let (xi, vols) = item?;
        for (i, v) in vols.iter().enumerate() {
            volumes[i] += w[k] * xi * v;
            coarse_vol[i] += coarse[k] * xi * v;
        }
    }
    let error = volumes.iter().zip(&coarse_vol).map(|(a, b)| (a - b).abs() / a.abs().max(1e-300)).fold(0.0, f64::max);
    Ok(VolumeEstimate { radii: radii.to_vec(), volumes, error })
}

pub fn ball_volume<L: Lagrangian>(space: &ChartedSpace<L>, origin: &[f64], r: f64, quad: &IndicatrixQuadrature) -> Result<f64> {
    let est = ball_volumes(space, origin, &[r], quad)?;
    if est.error > quad.rtol {
        return Err(Error::Quadrature { estimate: est.error, tol: quad.rtol });
    }
    Ok(est.volumes[0])
}

/// `(b/a) ∫₀^{min(R/a, π/√cK)} s^{1/c} / ∫₀^{r/b} s^{1/c}`.
pub fn bishop_gromov_bound(params: &ComparisonParams, a: f64, b: f64, r: f64, big_r: f64) -> Result<f64> {
    let kappa = params.c * params.k;
    let p = 1.0 / params.c;
    let s = |t: f64| comparison_s(kappa, t).map(|v| v.0.max(0.0).powf(p)).unwrap_or(0.0);
    let top = integrate_gk(s, 0.0, (big_r / a).min(comparison_horizon(kappa)), 1e-12)?;
    let bottom = integrate_gk(s, 0.0, r / b, 1e-12)?;
    Ok(b / a * top / bottom)
}

/// Bishop–Gromov volume ratio against its bound, with hypotheses sampled
/// along the geodesics of `hypothesis_bundle`.
pub fn check_bishop_gromov<L: Lagrangian>(
    space: &ChartedSpace<L>,
    params: &ComparisonParams,
    origin: &[f64],
    r: f64,
    big_r: f64,
    quad: &IndicatrixQuadrature,
    hypothesis_bundle: &[Vec<f64>],
    tol: f64,
) -> CheckReport {
    const NAME: &str = "bishop_gromov";
    if !(r > 0.0 && r < big_r) {
        return CheckReport::rejected(NAME, format!("radii must satisfy 0 < r < R (got {r}, {big_r})"));
    }
    let Some(b) = params.b else {
        return CheckReport::rejected(NAME, "the bounds a and b are required".into()).with_params(params);
    };
    let a = params.a;
    let model = comparison_horizon(params.c * params.k);
    if big_r > b * model {
        return CheckReport::rejected(NAME, format!("R = {big_r} exceeds b·π/√(cK) = {}", b * model));
    }
    for dir in hypothesis_bundle {
        let p = match bishop_profile(space, origin, dir, big_r, params) {
            Ok(p) => p,
            Err(e) => return failure_report(NAME, e).with_params(params),
        };
        if let Err(e) = validate_hypotheses(&p, true, true, true) {
            return failure_report(NAME, e).with_params(params);
        }
    }
    let est = match ball_volumes(space, origin, &[r, big_r], quad) {
        Ok(e) => e,
        Err(e) => return failure_report(NAME, e).with_params(params),
    };
    let bound = match bishop_gromov_bound(params, a, b, r, big_r) {
        Ok(x) => x,
        Err(e) => return failure_report(NAME, e).with_params(params),
    };
    let ratio = est.volumes[1] / est.volumes[0];
    let mut rep = CheckReport::from_residuals(NAME, vec![big_r], vec![(ratio - bound) / bound.max(1.0)], tol)
        .with_params(params)
        .value("ratio", ratio)
        .value("bound", bound)
        .value("volume_r", est.volumes[0])
        .value("volume_R", est.volumes[1])
        .value("quadrature_error", est.error);
    if est.error > quad.rtol {
        rep.verdict = Verdict::Error;
        rep.notes.push(format!("quadrature error estimate {:e} above {:e}", est.error, quad.rtol));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::Signature;
    use crate::weighted::NValue;
    use crate::zoo;

    fn params(dim: usize, n: NValue, eps: f64, k: f64, a: f64, b: Option<f64>) -> ComparisonParams {
        ComparisonParams::new(dim, Signature::Positive, n, eps, k, a, b).unwrap()
    }

    #[test]
    fn comparison_function_cases() {
        assert_eq!(comparison_s(0.0, 3.0).unwrap(), (3.0, 1.0));
        let (s, ds) = comparison_s(1.0, PI / 2.0).unwrap();
        assert!((s - 1.0).abs() < 1e-15 && ds.abs() < 1e-15);
        let (s, ds) = comparison_s(-1.0, 1.0).unwrap();
        assert!((s - 1f64.sinh()).abs() < 1e-15 && (ds - 1f64.cosh()).abs() < 1e-15);
        assert!(matches!(comparison_s(1.0, 4.0), Err(Error::ComparisonDomain { .. })));
    }

    #[test]
    fn euclidean_profile_is_linear() {
        let e = zoo::euclidean(3);
        let p = bishop_profile(&e, &[0.0; 3], &[1.0, 0.0, 0.0], 3.0, &params(3, NValue::Finite(3.0), 1.0, 0.0, 1.0, Some(1.0))).unwrap();
        for k in 0..p.t.len() {
            assert!((p.h[k] - p.t[k]).abs() < 1e-8);
            assert_eq!(p.tau[k], p.t[k]);
        }
        let r = check_bishop(&p, DEFAULT_TOL);
        assert!(r.passed(), "{r:?}");
        assert!(r.get("max_abs_residual").unwrap() < 1e-6);
        assert!((p.small_tau_slope(&e) - 1.0).abs() < 0.05);
    }

    #[test]
    fn sphere_profile_is_sine_and_tight() {
        let s = zoo::sphere(3);
        let pr = params(3, NValue::Finite(3.0), 1.0, 2.0, 1.0, Some(1.0));
        let p = bishop_profile(&s, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 3.0, &pr).unwrap();
        for k in 0..p.t.len() {
            assert!((p.h1[k] - p.t[k].sin()).abs() < 1e-6);
        }
        let r = check_bishop(&p, DEFAULT_TOL);
        assert!(r.passed() && r.get("max_abs_residual").unwrap() < 1e-3, "{r:?}");
    }

    #[test]
    fn sphere_bonnet_myers_is_tight() {
        let s = zoo::sphere(2);
        let pr = params(2, NValue::Finite(2.0), 1.0, 1.0, 1.0, Some(1.0));
        let bundle = Bundle { origin: vec![1.0, 0.0], directions: vec![vec![0.0, 1.0], vec![-0.3, 1.0]], horizon: 4.0 };
        let r = check_bonnet_myers(&s, &pr, &bundle, DEFAULT_TOL);
        assert!(r.passed(), "{r:?}");
        assert!((r.get("t0[0]").unwrap() - PI).abs() < 1e-3);
        assert!((r.get("bound").unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn euclidean_and_sphere_laplacians() {
        let e = zoo::euclidean(2);
        let pr = params(2, NValue::Finite(2.0), 1.0, 0.0, 1.0, Some(1.0));
        let td = radial_data(&e, &[0.0, 0.0], &[1.0, 1.0], 2.0).unwrap();
        let w = WeightAlongGeodesic::new(&e, &td.path, 1.0, 50).unwrap();
        assert!((radial_laplacian(&e, &td, &w, 0.7).unwrap() - 1.0 / 0.7).abs() < 1e-6);
        let bundle = Bundle { origin: vec![0.0, 0.0], directions: vec![vec![1.0, 0.0]], horizon: 2.0 };
        assert!(check_laplacian_comparison(&e, &pr, &bundle, DEFAULT_TOL).passed());
        let s = zoo::sphere(3);
        let td = radial_data(&s, &[0.0; 3], &[0.0, 1.0, 0.0], 2.5).unwrap();
        let w = WeightAlongGeodesic::new(&s, &td.path, 1.0, 50).unwrap();
        for t in [0.3f64, 1.2, 2.4] {
            let expect = 2.0 / t.tan();
            assert!((radial_laplacian(&s, &td, &w, t).unwrap() - expect).abs() < 1e-4);
        }
        let pr = params(3, NValue::Finite(3.0), 1.0, 2.0, 1.0, Some(1.0));
        let bundle = Bundle { origin: vec![0.0; 3], directions: vec![vec![0.0, 1.0, 0.0]], horizon: 3.0 };
        let r = check_laplacian_comparison(&s, &pr, &bundle, DEFAULT_TOL);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn gaussian_laplacian() {
        let lam = 0.5;
        let g = zoo::gaussian_weighted_euclidean(2, lam);
        let x = [0.3, -0.1];
        let td = radial_data(&g, &x, &[0.0, 1.0], 2.0).unwrap();
        let w = WeightAlongGeodesic::new(&g, &td.path, 1.0, 80).unwrap();
        for t in [0.4, 1.0, 1.9] {
            let expect = 1.0 / t - lam * (x[1] + t);
            assert!((radial_laplacian(&g, &td, &w, t).unwrap() - expect).abs() < 1e-4);
        }
    }

    #[test]
    fn euclidean_volumes() {
        let e = zoo::euclidean(2);
        let q = IndicatrixQuadrature::default();
        assert!((ball_volume(&e, &[0.0, 0.0], 1.0, &q).unwrap() - PI).abs() < 1e-3);
        let e3 = zoo::euclidean(3);
        let v = ball_volume(&e3, &[0.0; 3], 2.0, &q).unwrap();
        assert!((v - 32.0 * PI / 3.0).abs() < 1e-2, "{v}");
        let s = zoo::sphere(2);
        let v = ball_volume(&s, &[0.0, 0.0], PI / 2.0, &q).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-2, "{v}");
        let pr = params(2, NValue::Finite(2.0), 1.0, 0.0, 1.0, Some(1.0));
        let r = check_bishop_gromov(&e, &pr, &[0.0, 0.0], 1.0, 2.0, &q, &[vec![1.0, 0.0]], DEFAULT_TOL);
        assert!(r.passed() && (r.get("ratio").unwrap() - 4.0).abs() < 1e-6, "{r:?}");
        assert!((r.get("bound").unwrap() - 4.0).abs() < 1e-9);
    }
}
