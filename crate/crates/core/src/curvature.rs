//! Curvature, and the transverse Jacobi data along a geodesic: the matrices
//! `A, B, R` of a parallel frame and the first conjugate point.
//!
//! Jacobi fields are integrated through the variational equation of the
//! geodesic flow, `E″ = −2(∂_xG·E + ∂_vG·E′)`, alongside the geodesic and a
//! frame transported by `e′ = −N e`. Everything downstream reads the frame
//! components `Y = (g(E_i, e_k))` and `Ẏ = (g(D E_i, e_k))`.

use nalgebra::DMatrix;

use crate::connection::{nonlinear_connection, spray, spray_directional};
use crate::error::{Error, Result};
use crate::geodesic::{default_h_max, GeodesicPath};
use crate::lagrangian::{vertical_hessian, ChartedSpace, Lagrangian, Signature};
use crate::linalg;
use crate::report::CheckReport;
use crate::ode::{integrate, DenseSolution, OdeOptions};
use crate::scalar::{hyper, Dual};
use crate::tensor::{fundamental_tensor, raw_metric};

/// `R^i_j(v)` as a `d×d` matrix.
pub fn curvature_operator<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<DMatrix<f64>> {
    space.check_vector(x, v)?;
    curvature_unchecked(&space.lagrangian, x, v)
}

pub(crate) fn curvature_unchecked<L: Lagrangian>(lag: &L, x: &[f64], v: &[f64]) -> Result<DMatrix<f64>> {
    let d = x.len();
    let (g, n) = nonlinear_connection(lag, x, v)?;
    let zero = vec![0.0; d];
    let mut r = DMatrix::zeros(d, d);
    let xc: Vec<Dual<Dual<f64>>> = x.iter().map(|&c| hyper(c, 0.0, 0.0)).collect();
    let xv: Vec<Dual<Dual<f64>>> = x.iter().zip(v).map(|(&c, &vc)| hyper(c, vc, 0.0)).collect();
    for j in 0..d {
        let mut e = zero.clone();
        e[j] = 1.0;
        let (_, dxg) = spray_directional(lag, x, v, &e, &zero)?;
        let vj: Vec<Dual<Dual<f64>>> = v.iter().zip(&e).map(|(&c, &ej)| hyper(c, 0.0, ej)).collect();
        let m1 = spray(lag, &xv, &vj).ok_or_else(|| Error::Numerical("singular metric".into()))?;
        let vg: Vec<Dual<Dual<f64>>> = v.iter().zip(&e).zip(&g).map(|((&c, &ej), &gk)| hyper(c, gk, ej)).collect();
        let m2 = spray(lag, &xc, &vg).ok_or_else(|| Error::Numerical("singular metric".into()))?;
        for i in 0..d {
            let nn: f64 = (0..d).map(|k| n[i * d + k] * n[k * d + j]).sum();
            r[(i, j)] = 2.0 * dxg[i] - m1[i].du.du + 2.0 * m2[i].du.du - nn;
        }
    }
    Ok(r)
}

/// `Ric(v) = trace R_v`.
pub fn ricci_scalar<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<f64> {
    Ok(curvature_operator(space, x, v)?.trace())
}

/// Flag curvature with the sign convention making the unit sphere and the
/// `cos`-warped spacetime both have curvature `+1`.
pub fn flag_curvature<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let g = fundamental_tensor(space, x, v)?;
    let r = curvature_unchecked(&space.lagrangian, x, v)?;
    let rw: Vec<f64> = (&r * linalg::dvec(w)).iter().copied().collect();
    let denom = g.apply(v, v) * g.apply(w, w) - g.apply(v, w).powi(2);
    let nv: f64 = v.iter().map(|c| c * c).sum();
    let nw: f64 = w.iter().map(|c| c * c).sum();
    if denom.abs() <= 1e-10 * nv * nw * linalg::max_abs(&g.matrix).powi(2) {
        return Err(Error::DegenerateFlag { denominator: denom });
    }
    let k = g.apply(&rw, w) / denom;
    Ok(match space.signature() {
        Signature::Positive => k,
        Signature::Lorentzian => -k,
    })
}

/// `d/dt g_{η̇(t)}` along a geodesic through `(x, v)`.
fn metric_dot<L: Lagrangian>(lag: &L, x: &[f64], v: &[f64], acc: &[f64]) -> DMatrix<f64> {
    let xs: Vec<Dual<f64>> = x.iter().zip(v).map(|(&a, &b)| Dual::new(a, b)).collect();
    let vs: Vec<Dual<f64>> = v.iter().zip(acc).map(|(&a, &b)| Dual::new(a, b)).collect();
    let g = vertical_hessian(lag, &xs, &vs);
    let d = x.len();
    DMatrix::from_row_slice(d, d, &g.iter().map(|c| c.du).collect::<Vec<_>>())
}

/// Gram–Schmidt basis of the `g_v`-orthogonal complement of `v`.
pub fn orthonormal_complement(g: &DMatrix<f64>, v: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = v.len();
    let ip = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += g[(i, j)] * a[i] * b[j];
            }
        }
        s
    };
    let gvv = ip(v, v);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // try coordinate vectors in order of how transverse they are
    let mut cands: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            let c = ip(v, &e) / gvv;
            e.iter().zip(v).map(|(a, b)| a - c * b).collect()
        })
        .collect();
    cands.sort_by(|a, b| ip(b, b).abs().partial_cmp(&ip(a, a).abs()).unwrap());
    for mut w in cands {
        for b in &basis {
            let c = ip(&w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let nrm = ip(&w, &w);
        if nrm > 1e-8 {
            let s = nrm.sqrt();
            basis.push(w.iter().map(|c| c / s).collect());
        }
        if basis.len() == d - 1 {
            return Ok(basis);
        }
    }
    Err(Error::Numerical("could not build a transverse frame".into()))
}

/// Layout of the augmented state `[x, v, e_1..e_m, E_1..E_m, E′_1..E′_m]`.
#[derive(Clone, Copy, Debug)]
struct Layout {
    d: usize,
    m: usize,
}

impl Layout {
    fn len(self) -> usize {
        2 * self.d + 3 * self.m * self.d
    }
    fn frame(self, k: usize) -> usize {
        2 * self.d + k * self.d
    }
    fn field(self, i: usize) -> usize {
        2 * self.d + (self.m + i) * self.d
    }
    fn field_dot(self, i: usize) -> usize {
        2 * self.d + (2 * self.m + i) * self.d
    }
}

fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|i| (0..d).map(|j| a[i * d + j] * x[j]).sum()).collect()
}

/// Right-hand side of the augmented system; `None` outside the chart.
fn augmented_rhs<L: Lagrangian>(lag: &L, lay: Layout, y: &[f64]) -> Option<Vec<f64>> {
    let d = lay.d;
    let (x, v) = (&y[..d], &y[d..2 * d]);
    if !lag.in_domain(x) || !y.iter().all(|c| c.is_finite()) {
        return None;
    }
    let (g, n) = nonlinear_connection(lag, x, v).ok()?;
    let mut out = vec![0.0; lay.len()];
    out[..d].copy_from_slice(v);
    for i in 0..d {
        out[d + i] = -2.0 * g[i];
    }
    let zero = vec![0.0; d];
    for k in 0..lay.m {
        let e = &y[lay.frame(k)..lay.frame(k) + d];
        let ne = matvec(&n, e);
        for i in 0..d {
            out[lay.frame(k) + i] = -ne[i];
        }
        let ef = &y[lay.field(k)..lay.field(k) + d];
        let efd = &y[lay.field_dot(k)..lay.field_dot(k) + d];
        let (_, dxg) = spray_directional(lag, x, v, ef, &zero).ok()?;
        let nefd = matvec(&n, efd);
        for i in 0..d {
            out[lay.field(k) + i] = efd[i];
            out[lay.field_dot(k) + i] = -2.0 * (dxg[i] + nefd[i]);
        }
    }
    Some(out)
}

/// Everything the comparison checks need at one parameter value.
#[derive(Clone, Debug)]
pub struct FrameSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Frame vectors `e_k(t)` in coordinates.
    pub frame: Vec<Vec<f64>>,
    /// Jacobi fields `E_i(t)` and `D E_i(t)` in coordinates.
    pub fields: Vec<Vec<f64>>,
    pub fields_cov: Vec<Vec<f64>>,
    /// `Y_ki = g(E_i, e_k)`, `Ẏ_ki = g(D E_i, e_k)`.
    pub y: DMatrix<f64>,
    pub ydot: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    /// `A′` computed from coordinates (not from the frame).
    pub a_prime: DMatrix<f64>,
    /// Gauss-lemma residual `max_i |g(η̇, E_i)|`.
    pub gauss: f64,
    /// `max |eᵀ g e − I|`.
    pub frame_drift: f64,
}

impl FrameSample {
    pub fn a(&self) -> DMatrix<f64> {
        self.y.transpose() * &self.y
    }

    /// `B` of the positive-case lemma, `D E_i = Σ b_ij E_j`.
    pub fn b(&self) -> Option<DMatrix<f64>> {
        let yinv = self.y.clone().try_inverse()?;
        Some(self.ydot.transpose() * yinv.transpose())
    }

    /// `B = J′J⁻¹` of the Lagrange tensor `J = Y`.
    pub fn b_lorentz(&self) -> Option<DMatrix<f64>> {
        let yinv = self.y.clone().try_inverse()?;
        Some(&self.ydot * yinv)
    }

    pub fn det_y(&self) -> f64 {
        self.y.determinant()
    }

    pub fn sigma_min(&self) -> f64 {
        linalg::sigma_min(&self.y)
    }

    /// `tr(Y⁻¹Ẏ) = (log |det Y|)′`.
    pub fn trace_b(&self) -> Option<f64> {
        Some((self.y.clone().try_inverse()? * &self.ydot).trace())
    }
}

/// Curvature in the frame: `ρ_kl = g(R e_l, e_k)` and `R_ij = g(R E_i, E_j)`.
#[derive(Clone, Debug)]
pub struct CurvatureSample {
    pub rho: DMatrix<f64>,
    pub rmat: DMatrix<f64>,
    pub ricci: f64,
}

/// Parallel transverse frame and Jacobi data along a unit-speed geodesic.
#[derive(Clone, Debug)]
pub struct TransverseData {
    pub path: GeodesicPath,
    pub m: usize,
    pub solution: DenseSolution,
    pub grid: Vec<f64>,
    pub samples: Vec<FrameSample>,
    pub frame_drift: f64,
    /// Earliest `t` where `det A` vanishes, if any on the horizon.
    pub singular_at: Option<f64>,
    lorentzian: bool,
}

/// Frame tolerance; drift beyond it is an error, never silently corrected.
pub const FRAME_TOL: f64 = 1e-6;

impl TransverseData {
    pub fn horizon(&self) -> f64 {
        self.solution.t_end()
    }

    /// Frame quantities at any `t` from the dense solution.
    pub fn sample<L: Lagrangian>(&self, space: &ChartedSpace<L>, t: f64) -> FrameSample {
        let (y, dy) = self.solution.eval(t);
        frame_sample(space, Layout { d: space.dim(), m: self.m }, t, &y, &dy)
    }

    /// Curvature matrices at a sample.
    pub fn curvature<L: Lagrangian>(&self, space: &ChartedSpace<L>, s: &FrameSample) -> Result<CurvatureSample> {
        let r = curvature_unchecked(&space.lagrangian, &s.x, &s.v)?;
        let m = self.m;
        let g = &s.metric;
        let gr = g * &r;
        let mut rho = DMatrix::zeros(m, m);
        for k in 0..m {
            for l in 0..m {
                rho[(k, l)] = quad(&gr, &s.frame[k], &s.frame[l]);
            }
        }
        let mut rmat = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                rmat[(i, j)] = quad(&gr, &s.fields[j], &s.fields[i]);
            }
        }
        Ok(CurvatureSample { rho, rmat, ricci: r.trace() })
    }

    pub fn is_lorentzian(&self) -> bool {
        self.lorentzian
    }
}

/// `aᵀ M b`.
fn quad(mtx: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            s += a[i] * mtx[(i, j)] * b[j];
        }
    }
    s
}

fn frame_sample<L: Lagrangian>(space: &ChartedSpace<L>, lay: Layout, t: f64, y: &[f64], dy: &[f64]) -> FrameSample {
    let (d, m) = (lay.d, lay.m);
    let x = y[..d].to_vec();
    let v = y[d..2 * d].to_vec();
    let acc = dy[d..2 * d].to_vec();
    let g = raw_metric(space, &x, &v);
    let n = nonlinear_connection(&space.lagrangian, &x, &v).map(|p| p.1).unwrap_or_else(|_| vec![f64::NAN; d * d]);
    let frame: Vec<Vec<f64>> = (0..m).map(|k| y[lay.frame(k)..lay.frame(k) + d].to_vec()).collect();
    let fields: Vec<Vec<f64>> = (0..m).map(|i| y[lay.field(i)..lay.field(i) + d].to_vec()).collect();
    let fdots: Vec<Vec<f64>> = (0..m).map(|i| y[lay.field_dot(i)..lay.field_dot(i) + d].to_vec()).collect();
    let fields_cov: Vec<Vec<f64>> =
        fields.iter().zip(&fdots).map(|(e, ed)| matvec(&n, e).iter().zip(ed).map(|(a, b)| a + b).collect()).collect();
    let mut ym = DMatrix::zeros(m, m);
    let mut yd = DMatrix::zeros(m, m);
    let mut drift = 0.0_f64;
    for k in 0..m {
        for i in 0..m {
            ym[(k, i)] = quad(&g, &fields[i], &frame[k]);
            yd[(k, i)] = quad(&g, &fields_cov[i], &frame[k]);
            let target = if k == i { 1.0 } else { 0.0 };
            drift = drift.max((quad(&g, &frame[k], &frame[i]) - target).abs());
        }
        drift = drift.max(quad(&g, &frame[k], &v).abs());
    }
    let gdot = metric_dot(&space.lagrangian, &x, &v, &acc);
    let mut a_prime = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a_prime[(i, j)] =
                quad(&g, &fdots[i], &fields[j]) + quad(&g, &fields[i], &fdots[j]) + quad(&gdot, &fields[i], &fields[j]);
        }
    }
    let gauss = fields.iter().map(|e| quad(&g, &v, e).abs()).fold(0.0, f64::max);
    FrameSample { t, x, v, frame, fields, fields_cov, y: ym, ydot: yd, metric: g, a_prime, gauss, frame_drift: drift }
}

/// Default number of output samples on a horizon.
pub const DEFAULT_SAMPLES: usize = 200;

/// Integrates the augmented system from the path's initial data over its
/// horizon and samples the frame quantities on a uniform grid.
pub fn transverse_data<L: Lagrangian>(space: &ChartedSpace<L>, path: &GeodesicPath) -> Result<TransverseData> {
    transverse_data_with(space, path, DEFAULT_SAMPLES, 1e-10)
}

pub fn transverse_data_with<L: Lagrangian>(
    space: &ChartedSpace<L>,
    path: &GeodesicPath,
    samples: usize,
    rtol: f64,
) -> Result<TransverseData> {
    let d = space.dim();
    let m = d - 1;
    let lay = Layout { d, m };
    let x0 = &path.points[0];
    let v0 = &path.velocities[0];
    let g0 = fundamental_tensor(space, x0, v0)?;
    let frame = orthonormal_complement(&g0.matrix, v0)?;
    let mut y0 = vec![0.0; lay.len()];
    y0[..d].copy_from_slice(x0);
    y0[d..2 * d].copy_from_slice(v0);
    for k in 0..m {
        y0[lay.frame(k)..lay.frame(k) + d].copy_from_slice(&frame[k]);
        // E(0) = 0 and D E(0) = E′(0) + N E(0) = e_k
        y0[lay.field_dot(k)..lay.field_dot(k) + d].copy_from_slice(&frame[k]);
    }
    let horizon = path.t_end();
    let opts = OdeOptions { rtol, atol: rtol * 1e-2, h_max: default_h_max(horizon), ..Default::default() };
    let lag = &space.lagrangian;
    let run = integrate(|_, y| augmented_rhs(lag, lay, y), 0.0, &y0, horizon, &opts);
    if let Some(e) = run.stopped {
        return Err(e);
    }
    let solution = run.solution;
    let grid: Vec<f64> = (1..=samples).map(|k| horizon * k as f64 / samples as f64).collect();
    let mut out = Vec::with_capacity(samples);
    let mut drift = 0.0_f64;
    for &t in &grid {
        let (y, dy) = solution.eval(t);
        let s = frame_sample(space, lay, t, &y, &dy);
        drift = drift.max(s.frame_drift);
        out.push(s);
    }
    if drift > FRAME_TOL {
        return Err(Error::FrameDrift { drift, tol: FRAME_TOL });
    }
    let mut td = TransverseData {
        path: path.clone(),
        m,
        solution,
        grid,
        samples: out,
        frame_drift: drift,
        singular_at: None,
        lorentzian: space.is_lorentzian(),
    };
    td.singular_at = first_conjugate_point_in(space, &td);
    Ok(td)
}

/// Smallest `t₀` on the horizon with `det A(t₀) = 0`, refined to 1e-6.
pub fn first_conjugate_point<L: Lagrangian>(space: &ChartedSpace<L>, td: &TransverseData) -> Option<f64> {
    td.singular_at.or_else(|| first_conjugate_point_in(space, td))
}

/// Residual budget of the matrix identities.
pub const LEMMA_TOL: f64 = 1e-4;
/// Budget of the Gauss-lemma orthogonality.
pub const GAUSS_TOL: f64 = 1e-6;

/// `‖BA − ABᵀ‖`, `‖A′ − 2BA‖` and `‖A″ − 2B²A + 2R‖` along the geodesic,
/// relative to the size of the terms, before the first conjugate point and
/// away from `t = 0`. `A″` comes from a five-point stencil on `A′`.
pub fn matrix_lemma_check<L: Lagrangian>(space: &ChartedSpace<L>, td: &TransverseData) -> CheckReport {
    const NAME: &str = "matrix_lemma";
    if td.is_lorentzian() {
        return CheckReport::rejected(NAME, "the matrix identities are checked on positive spaces".into());
    }
    let end = td.singular_at.map_or(td.horizon(), |t0| t0.min(td.horizon()));
    let (mut grid, mut res) = (Vec::new(), Vec::new());
    let (mut sym, mut first, mut second, mut gauss) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for smp in &td.samples {
        let t = smp.t;
        let delta = (0.01 * end).min(t / 16.0);
        if t < 0.05 * end || t + 2.0 * delta >= end {
            continue;
        }
        let Some(b) = smp.b() else { continue };
        let Ok(curv) = td.curvature(space, smp) else { continue };
        let a = smp.a();
        let ba = &b * &a;
        let r1 = (&ba - ba.transpose()).abs().max() / ba.abs().max().max(1.0);
        let r2 = (&smp.a_prime - &ba * 2.0).abs().max() / smp.a_prime.abs().max().max(1.0);
        let ap = |s: f64| td.sample(space, s).a_prime;
        let app = (ap(t - 2.0 * delta) - ap(t - delta) * 8.0 + ap(t + delta) * 8.0 - ap(t + 2.0 * delta)) / (12.0 * delta);
        let bba = &b * &ba * 2.0;
        let r3 = (&app - &bba + &curv.rmat * 2.0).abs().max() / bba.abs().max().max(app.abs().max()).max(1.0);
        sym = sym.max(r1);
        first = first.max(r2);
        second = second.max(r3);
        gauss = gauss.max(smp.gauss);
        grid.push(t);
        res.push(r1.max(r2).max(r3).max(smp.gauss * LEMMA_TOL / GAUSS_TOL));
    }
    if grid.is_empty() {
        return CheckReport::numerical_error(NAME, "no samples inside the checked range".into());
    }
    CheckReport::from_residuals(NAME, grid, res, LEMMA_TOL)
        .value("ba_symmetry", sym)
        .value("a_prime", first)
        .value("riccati", second)
        .value("gauss", gauss)
        .note("the Gauss-lemma residual is scaled so that 1e-6 maps to the report tolerance")
}

/// Relative threshold below which a refined local minimum of `σ_min(Y)`
/// counts as a (tangential) zero.
pub const TANGENCY_TOL: f64 = 1e-6;

fn first_conjugate_point_in<L: Lagrangian>(space: &ChartedSpace<L>, td: &TransverseData) -> Option<f64> {
    let lay = Layout { d: space.dim(), m: td.m };
    let at = |t: f64| -> (f64, f64) {
        let (y, dy) = td.solution.eval(t);
        let s = frame_sample(space, lay, t, &y, &dy);
        (s.det_y(), s.sigma_min())
    };
    let dets: Vec<f64> = td.samples.iter().map(|s| s.det_y()).collect();
    let sig: Vec<f64> = td.samples.iter().map(|s| s.sigma_min()).collect();
    let scale = sig.iter().fold(1e-300_f64, |a, &b| a.max(b)).min(1.0).max(td.grid[0]);
    for k in 0..td.samples.len() {
        // sign change of det Y between k-1 and k
        if k > 0 && dets[k - 1] * dets[k] < 0.0 {
            let (mut lo, mut hi) = (td.grid[k - 1], td.grid[k]);
            let s_lo = dets[k - 1].signum();
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if at(mid).0.signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        if dets[k] == 0.0 {
            return Some(td.grid[k]);
        }
        // local minimum of σ_min (tangential zero)
        let interior = k > 0 && k + 1 < sig.len();
        if interior && sig[k] <= sig[k - 1] && sig[k] <= sig[k + 1] && sig[k] < 0.2 * scale {
            let (mut a, mut b) = (td.grid[k - 1], td.grid[k + 1]);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - phi * (b - a);
            let mut dd = a + phi * (b - a);
            let (mut fc, mut fd) = (at(c).1, at(dd).1);
            while b - a > 1e-9 {
                if fc < fd {
                    b = dd;
                    dd = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = at(c).1;
                } else {
                    a = c;
                    c = dd;
                    fc = fd;
                    dd = a + phi * (b - a);
                    fd = at(dd).1;
                }
            }
            let t0 = 0.5 * (a + b);
            if at(t0).1 <= TANGENCY_TOL * scale.max(1.0) {
                return Some(t0);
            }
        }
    }
    None
}

/// A Jacobi field along a geodesic with its covariant derivative.
#[derive(Clone, Debug)]
pub struct JacobiField {
    pub path: GeodesicPath,
    pub t: Vec<f64>,
    pub j: Vec<Vec<f64>>,
    pub dj: Vec<Vec<f64>>,
    /// Max of `‖J″ + R(J)‖` in the parallel frame over the grid.
    pub residual: f64,
}

/// Integrates the Jacobi field with `J(0) = j0`, `D J(0) = dj0` and
/// measures the residual of `J″ + R_η̇(J) = 0` in the transported frame.
pub fn jacobi_field<L: Lagrangian>(
    space: &ChartedSpace<L>,
    path: &GeodesicPath,
    j0: &[f64],
    dj0: &[f64],
    samples: usize,
) -> Result<JacobiField> {
    let d = space.dim();
    let lag = &space.lagrangian;
    let x0 = &path.points[0];
    let v0 = &path.velocities[0];
    let g0 = fundamental_tensor(space, x0, v0)?;
    let mut frame = orthonormal_complement(&g0.matrix, v0)?;
    // full frame: add the unit tangent so that J may have a tangential part
    let f = g0.apply(v0, v0).abs().sqrt();
    frame.push(v0.iter().map(|c| c / f).collect());
    let (_, n0) = nonlinear_connection(lag, x0, v0)?;
    let nj = matvec(&n0, j0);
    // state: x, v, frame (d vectors), J, J′
    let len = 2 * d + d * d + 2 * d;
    let mut y0 = vec![0.0; len];
    y0[..d].copy_from_slice(x0);
    y0[d..2 * d].copy_from_slice(v0);
    for k in 0..d {
        y0[2 * d + k * d..2 * d + (k + 1) * d].copy_from_slice(&frame[k]);
    }
    let jo = 2 * d + d * d;
    y0[jo..jo + d].copy_from_slice(j0);
    for i in 0..d {
        y0[jo + d + i] = dj0[i] - nj[i];
    }
    let rhs = |_t: f64, y: &[f64]| -> Option<Vec<f64>> {
        let (x, v) = (&y[..d], &y[d..2 * d]);
        if !lag.in_domain(x) {
            return None;
        }
        let (g, n) = nonlinear_connection(lag, x, v).ok()?;
        let mut out = vec![0.0; len];
        out[..d].copy_from_slice(v);
        for i in 0..d {
            out[d + i] = -2.0 * g[i];
        }
        for k in 0..d {
            let e = &y[2 * d + k * d..2 * d + (k + 1) * d];
            let ne = matvec(&n, e);
            for i in 0..d {
                out[2 * d + k * d + i] = -ne[i];
            }
        }
        let (jv, jd) = (&y[jo..jo + d], &y[jo + d..jo + 2 * d]);
        let (_, dxg) = spray_directional(lag, x, v, jv, &vec![0.0; d]).ok()?;
        let njd = matvec(&n, jd);
        for i in 0..d {
            out[jo + i] = jd[i];
            out[jo + d + i] = -2.0 * (dxg[i] + njd[i]);
        }
        Some(out)
    };
    let horizon = path.t_end();
    let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, h_max: default_h_max(horizon), ..Default::default() };
    let run = integrate(rhs, 0.0, &y0, horizon, &opts);
    if let Some(e) = run.stopped {
        return Err(e);
    }
    let sol = run.solution;
    // frame components of D J and R(J), sign-corrected for the tangent
    let comps = |t: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (y, _) = sol.eval(t);
        let (x, v) = (y[..d].to_vec(), y[d..2 * d].to_vec());
        let g = raw_metric(space, &x, &v);
        let n = nonlinear_connection(lag, &x, &v).map(|p| p.1).unwrap_or_else(|_| vec![f64::NAN; d * d]);
        let fr: Vec<Vec<f64>> = (0..d).map(|k| y[2 * d + k * d..2 * d + (k + 1) * d].to_vec()).collect();
        let jv = y[jo..jo + d].to_vec();
        let dj: Vec<f64> = matvec(&n, &jv).iter().zip(&y[jo + d..jo + 2 * d]).map(|(a, b)| a + b).collect();
        // the frame is g-orthonormal up to the sign of the tangent's norm
        let sign: Vec<f64> = fr.iter().map(|e| quad(&g, e, e).signum()).collect();
        let cd: Vec<f64> = fr.iter().zip(&sign).map(|(e, s)| s * quad(&g, &dj, e)).collect();
        let r = curvature_unchecked(lag, &x, &v).unwrap_or_else(|_| DMatrix::from_element(d, d, f64::NAN));
        let rj: Vec<f64> = (&r * linalg::dvec(&jv)).iter().copied().collect();
        let rc: Vec<f64> = fr.iter().zip(&sign).map(|(e, s)| s * quad(&g, &rj, e)).collect();
        (jv, dj, cd, rc)
    };
    let grid: Vec<f64> = (0..=samples).map(|k| horizon * k as f64 / samples as f64).collect();
    let mut jv = Vec::new();
    let mut djv = Vec::new();
    let mut residual = 0.0_f64;
    let h = 1e-4 * horizon.max(1.0);
    for &t in &grid {
        let (j, dj, _, rc) = comps(t);
        if t - h > 0.0 && t + h < horizon {
            let (_, _, cp, _) = comps(t + h);
            let (_, _, cm, _) = comps(t - h);
            for i in 0..d {
                let cdd = (cp[i] - cm[i]) / (2.0 * h);
                residual = residual.max((cdd + rc[i]).abs());
            }
        }
        jv.push(j);
        djv.push(dj);
    }
    Ok(JacobiField { path: path.clone(), t: grid, j: jv, dj: djv, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{integrate_geodesic, unit_speed};
    use crate::zoo::{self, Warp};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn flat_curvature_vanishes() {
        for s in [zoo::euclidean(3), zoo::minkowski(2)] {
            let r = curvature_operator(&s, &[0.1, 0.2, 0.3], &[1.0, 0.3, 0.1]).unwrap();
            assert!(linalg::max_abs(&r) < 1e-13);
        }
        let r = zoo::randers(3, 0.5).unwrap();
        assert!(ricci_scalar(&r, &[0.3, 0.0, 0.1], &[0.2, 1.0, 0.4]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_curvature_ricci() {
        for n in [2, 3] {
            let s = zoo::sphere(n);
            let h = zoo::poincare_ball(n);
            let x: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 + 1.0)).collect();
            let w: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * i as f64).collect();
            let v = unit_speed(&s, &x, &w).unwrap();
            assert_relative_eq!(ricci_scalar(&s, &x, &v).unwrap(), (n - 1) as f64, max_relative = 1e-10);
            let v = unit_speed(&h, &x, &w).unwrap();
            assert_relative_eq!(ricci_scalar(&h, &x, &v).unwrap(), -((n - 1) as f64), max_relative = 1e-10);
        }
    }

    #[test]
    fn sphere_curvature_operator_is_identity_on_complement() {
        let s = zoo::sphere(3);
        let x = [0.2, -0.1, 0.4];
        let v = unit_speed(&s, &x, &[0.3, 1.0, -0.2]).unwrap();
        let r = curvature_operator(&s, &x, &v).unwrap();
        let g = fundamental_tensor(&s, &x, &v).unwrap();
        let w = [0.5, 0.1, 0.9];
        let rw: Vec<f64> = (&r * linalg::dvec(&w)).iter().copied().collect();
        let gvw = g.apply(&v, &w);
        for i in 0..3 {
            assert_relative_eq!(rw[i], w[i] - gvw * v[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn flrw_flag_curvature_is_one() {
        let f = zoo::flrw(1, Warp::Cos);
        let k = flag_curvature(&f, &[0.0, 0.3], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-12);
        let r = curvature_operator(&f, &[0.0, 0.3], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(r[(1, 1)], 1.0, epsilon = 1e-12);
        assert!(matches!(flag_curvature(&f, &[0.0, 0.3], &[1.0, 0.0], &[2.0, 0.0]), Err(Error::DegenerateFlag { .. })));
        let s = zoo::sphere(2);
        let k = flag_curvature(&s, &[0.3, 0.1], &[1.0, 0.2], &[0.1, 1.0]).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn euclidean_transverse_data() {
        let e = zoo::euclidean(3);
        let p = integrate_geodesic(&e, &[0.0; 3], &[0.0, 1.0, 0.0], 10.0, 1e-10).unwrap();
        let td = transverse_data(&e, &p).unwrap();
        assert!(td.singular_at.is_none());
        for s in &td.samples {
            let a = s.a();
            let b = s.b().unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(a[(i, j)], s.t * s.t * id, epsilon = 1e-8);
                    assert_relative_eq!(b[(i, j)], id / s.t, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn sphere_transverse_data_and_conjugate_point() {
        let s = zoo::sphere(3);
        let x0 = [1.0, 0.0, 0.0];
        let v0 = unit_speed(&s, &x0, &[0.0, 1.0, 0.5]).unwrap();
        let p = integrate_geodesic(&s, &x0, &v0, 3.5, 1e-10).unwrap();
        let td = transverse_data(&s, &p).unwrap();
        for smp in td.samples.iter().filter(|s| s.t < 3.0) {
            let a = smp.a();
            assert_relative_eq!(a[(0, 0)], smp.t.sin().powi(2), epsilon = 1e-7);
            assert!(a[(0, 1)].abs() < 1e-7);
            assert!(smp.gauss < 1e-8);
        }
        let t0 = first_conjugate_point(&s, &td).unwrap();
        assert!((t0 - PI).abs() < 1e-4, "{t0}");
    }

    #[test]
    fn jacobi_residual_is_small_on_sphere() {
        let s = zoo::sphere(2);
        let v0 = unit_speed(&s, &[0.2, 0.1], &[1.0, 0.3]).unwrap();
        let p = integrate_geodesic(&s, &[0.2, 0.1], &v0, 2.0, 1e-10).unwrap();
        let j = jacobi_field(&s, &p, &[0.0, 0.0], &[0.1, 0.7], 50).unwrap();
        assert!(j.residual < 1e-5, "{}", j.residual);
    }

    #[test]
    fn matrix_identities_hold() {
        let cases = [
            (zoo::sphere(3), vec![0.1, 0.0, 0.2], vec![1.0, 0.4, 0.0], 2.5),
            (zoo::randers(3, 0.4).unwrap(), vec![0.0; 3], vec![0.3, 1.0, 0.2], 3.0),
            (zoo::poincare_ball(2), vec![0.1, 0.0], vec![0.0, 1.0], 1.5),
        ];
        for (s, x, w, h) in cases {
            let v = unit_speed(&s, &x, &w).unwrap();
            let p = integrate_geodesic(&s, &x, &v, h, 1e-10).unwrap();
            let td = transverse_data(&s, &p).unwrap();
            let r = matrix_lemma_check(&s, &td);
            assert!(r.passed(), "{}: {:?}", s.name, r.values);
        }
    }
}
