//! Weighted Ricci curvature, the ε-range, and the φ reparametrization.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use std::path::Path;

use crate::connection::{spray_directional, spray_f64};
use crate::curvature::ricci_scalar;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geodesic::GeodesicPath;
use crate::lagrangian::{ChartedSpace, Lagrangian, Signature, Weight};
use crate::quadrature::integrate_gk;
use crate::report::{write_csv, CheckReport};
use crate::scalar::Dual;

/// Effective dimension `N`, with the infinities as explicit values so that
/// the `ψ′²/(N−n)` term vanishes identically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NValue {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl NValue {
    pub fn is_infinite(self) -> bool {
        !matches!(self, NValue::Finite(_))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            NValue::Finite(x) => x,
            NValue::PlusInfinity => f64::INFINITY,
            NValue::MinusInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            NValue::PlusInfinity
        } else if x == f64::NEG_INFINITY {
            NValue::MinusInfinity
        } else {
            NValue::Finite(x)
        }
    }

    /// `1/(N − n)`, zero at `N = ±∞`, `None` at `N = n`.
    pub fn inverse_gap(self, n: usize) -> Option<f64> {
        match self {
            NValue::Finite(x) if x == n as f64 => None,
            NValue::Finite(x) => Some(1.0 / (x - n as f64)),
            _ => Some(0.0),
        }
    }
}

impl fmt::Display for NValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NValue::Finite(x) => write!(f, "{x}"),
            NValue::PlusInfinity => f.write_str("inf"),
            NValue::MinusInfinity => f.write_str("-inf"),
        }
    }
}

impl Serialize for NValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NValue::Finite(x) => s.serialize_f64(*x),
            NValue::PlusInfinity => s.serialize_str("inf"),
            NValue::MinusInfinity => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = NValue;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<NValue, E> {
                Ok(NValue::from_f64(x))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<NValue, E> {
                Ok(NValue::Finite(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<NValue, E> {
                Ok(NValue::Finite(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<NValue, E> {
                match s.trim().to_ascii_lowercase().as_str() {
                    "inf" | "+inf" | "infinity" | "+infinity" => Ok(NValue::PlusInfinity),
                    "-inf" | "-infinity" => Ok(NValue::MinusInfinity),
                    other => other.parse::<f64>().map(NValue::from_f64).map_err(|_| E::custom(format!("bad N {s:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Shape of the ε-range for a space: `n` in `N − n`, the transverse
/// dimension `m`, and the lower endpoint `N₀` (1 positive, 0 Lorentzian).
#[derive(Clone, Copy, Debug, PartialEq)]
struct RangeShape {
    n: f64,
    m: f64,
    n0: f64,
}

fn shape(dim: usize, signature: Signature) -> RangeShape {
    match signature {
        Signature::Positive => RangeShape { n: dim as f64, m: dim as f64 - 1.0, n0: 1.0 },
        Signature::Lorentzian => RangeShape { n: dim as f64 - 1.0, m: dim as f64 - 1.0, n0: 0.0 },
    }
}

/// Supremum of admissible `|ε|` for `N` (infinite when `N = n`, zero when
/// `N = N₀`). Errors on the forbidden interval `(N₀, n)`.
pub fn epsilon_bound(dim: usize, signature: Signature, n_eff: NValue) -> Result<f64> {
    let s = shape(dim, signature);
    match n_eff {
        NValue::PlusInfinity | NValue::MinusInfinity => Ok(1.0),
        NValue::Finite(nn) => {
            if !nn.is_finite() {
                return Err(Error::ForbiddenN { n: nn, interval: "finite or +-inf".into() });
            }
            if nn > s.n0 && nn < s.n {
                return Err(Error::ForbiddenN { n: nn, interval: format!("({}, {})", s.n0, s.n) });
            }
            if nn == s.n {
                Ok(f64::INFINITY)
            } else if nn == s.n0 {
                Ok(0.0)
            } else {
                Ok(((nn - s.n0) / (nn - s.n)).sqrt())
            }
        }
    }
}

fn range_text(bound: f64) -> String {
    if bound == 0.0 {
        "{0}".into()
    } else if bound.is_infinite() {
        "(-inf, inf)".into()
    } else {
        format!("(-{bound}, {bound})")
    }
}

/// The constant `c(N, ε) = (1/m)(1 − ε²(N−n)/(N−N₀))` after validating `N`
/// and `ε` against the ε-range.
pub fn epsilon_range_constant(dim: usize, signature: Signature, n_eff: NValue, eps: f64) -> Result<f64> {
    let s = shape(dim, signature);
    let bound = epsilon_bound(dim, signature, n_eff)?;
    let ok = if bound == 0.0 { eps == 0.0 } else { eps.abs() < bound };
    if !ok || !eps.is_finite() {
        return Err(Error::EpsOutOfRange { eps, range: range_text(bound) });
    }
    let c = match n_eff {
        NValue::PlusInfinity | NValue::MinusInfinity => (1.0 - eps * eps) / s.m,
        NValue::Finite(nn) if nn == s.n || nn == s.n0 => 1.0 / s.m,
        NValue::Finite(nn) => (1.0 - eps * eps * (nn - s.n) / (nn - s.n0)) / s.m,
    };
    Ok(c)
}

/// `(N, ε, K, a, b)` with the derived `c` and transverse dimension `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonParams {
    pub n: NValue,
    pub eps: f64,
    pub k: f64,
    pub a: f64,
    pub b: Option<f64>,
    pub c: f64,
    pub m: usize,
    pub signature: Signature,
}

impl ComparisonParams {
    pub fn new(dim: usize, signature: Signature, n: NValue, eps: f64, k: f64, a: f64, b: Option<f64>) -> Result<Self> {
        let c = epsilon_range_constant(dim, signature, n, eps)?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParam { param: "a".into(), message: format!("{a} must be positive") });
        }
        if let Some(b) = b {
            if !(b >= a && b.is_finite()) {
                return Err(Error::InvalidParam { param: "b".into(), message: format!("b = {b} must satisfy b >= a = {a}") });
            }
        }
        if !k.is_finite() {
            return Err(Error::InvalidParam { param: "K".into(), message: "must be finite".into() });
        }
        Ok(ComparisonParams { n, eps, k, a, b, c, m: dim - 1, signature })
    }

    /// Exponent factor `2(ε−1)/m` appearing in `φ′ = exp(2(ε−1)ψ/m)`.
    pub fn phi_rate(&self) -> f64 {
        2.0 * (self.eps - 1.0) / self.m as f64
    }

    /// The `n` in `N − n`.
    pub fn ricci_n(&self) -> usize {
        match self.signature {
            Signature::Positive => self.m + 1,
            Signature::Lorentzian => self.m,
        }
    }
}


/// `(ψ, ψ′, ψ″)` of `t ↦ ψ(η̇(t))` at `t = 0` for the geodesic with
/// `η̇(0) = v`. The weight is evaluated on second-order duals seeded with
/// the flow jet `(x, v, −2G, −2 dG/dt)`, so the derivatives are exact.
pub fn psi_jet<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<[f64; 3]> {
    if space.weight.is_none() {
        return Ok([0.0; 3]);
    }
    let lag = &space.lagrangian;
    let acc: Vec<f64> = spray_f64(lag, x, v)?.iter().map(|g| -2.0 * g).collect();
    let (_, dg) = spray_directional(lag, x, v, v, &acc)?;
    let jerk: Vec<f64> = dg.iter().map(|g| -2.0 * g).collect();
    // c + (ε₁ + ε₂)a + ε₁ε₂b
    let seed = |c: f64, a: f64, b: f64| Dual::new(Dual::new(c, a), Dual::new(a, b));
    let xs: Vec<Dual<Dual<f64>>> = (0..x.len()).map(|i| seed(x[i], v[i], acc[i])).collect();
    let vs: Vec<Dual<Dual<f64>>> = (0..x.len()).map(|i| seed(v[i], acc[i], jerk[i])).collect();
    let w = space.weight.eval(lag, &xs, &vs);
    Ok([w.re.re, w.re.du, w.du.du])
}

/// Quintic Hermite interpolation from the 2-jets at the two ends of an interval of length `h`; returns `(p, p′, p″)`.
fn quintic(s: f64, h: f64, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let (s2, s3, s4, s5) = (s * s, s * s * s, s.powi(4), s.powi(5));
    let basis = [
        [1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5, -30.0 * s2 + 60.0 * s3 - 30.0 * s4, -60.0 * s + 180.0 * s2 - 120.0 * s3],
        [s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5, 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4, -36.0 * s + 96.0 * s2 - 60.0 * s3],
        [0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5, s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4, 1.0 - 9.0 * s + 18.0 * s2 - 10.0 * s3],
        [0.5 * s3 - s4 + 0.5 * s5, 1.5 * s2 - 4.0 * s3 + 2.5 * s4, 3.0 * s - 12.0 * s2 + 10.0 * s3],
        [-4.0 * s3 + 7.0 * s4 - 3.0 * s5, -12.0 * s2 + 28.0 * s3 - 15.0 * s4, -24.0 * s + 84.0 * s2 - 60.0 * s3],
        [10.0 * s3 - 15.0 * s4 + 6.0 * s5, 30.0 * s2 - 60.0 * s3 + 30.0 * s4, 60.0 * s - 180.0 * s2 + 120.0 * s3],
    ];
    let coef = [a[0], h * a[1], h * h * a[2], h * h * b[2], h * b[1], b[0]];
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let scale = h.powi(-(k as i32));
        *o = scale * basis.iter().zip(&coef).map(|(bb, c)| bb[k] * c).sum::<f64>();
    }
    out
}

/// `φ(t) = ∫₀ᵗ exp(rate·ψ)` on the profile grid and the finite-horizon
/// completeness integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Reparametrization {
    pub eps: f64,
    /// `2(ε−1)/m`.
    pub rate: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// `φ(horizon)`, the ε-completeness diagnostic.
    pub completeness: f64,
}

/// `ψ_η` and its derivatives on a uniform grid along a geodesic, with the
/// reparametrization `φ_η`.
#[derive(Clone, Debug)]
pub struct WeightAlongGeodesic {
    pub path: GeodesicPath,
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    pub ddpsi: Vec<f64>,
    pub reparam: Reparametrization,
}

/// Relative disagreement allowed between dual and difference derivatives.
pub const JET_CROSSCHECK_TOL: f64 = 1e-5;

impl WeightAlongGeodesic {
    /// Samples the profile at `samples + 1` uniform points on the path's
    /// horizon and builds `φ` for `eps`.
    pub fn new<L: Lagrangian>(space: &ChartedSpace<L>, path: &GeodesicPath, eps: f64, samples: usize) -> Result<Self> {
        let horizon = path.t_end();
        let t: Vec<f64> = (0..=samples).map(|k| horizon * k as f64 / samples as f64).collect();
        let (mut psi, mut dpsi, mut ddpsi) = (Vec::new(), Vec::new(), Vec::new());
        for &tk in &t {
            let (x, v) = path.at(tk);
            let [a, b, c] = psi_jet(space, &x, &v)?;
            psi.push(a);
            dpsi.push(b);
            ddpsi.push(c);
        }
        let mut w = WeightAlongGeodesic {
            path: path.clone(),
            t,
            psi,
            dpsi,
            ddpsi,
            reparam: Reparametrization { eps: 1.0, rate: 0.0, phi: vec![], dphi: vec![], completeness: 0.0 },
        };
        w.cross_check()?;
        w.reparam = reparametrize(&w, eps, space.transverse_dim())?;
        Ok(w)
    }

    /// Same profile, new `ε`.
    pub fn with_eps(mut self, eps: f64, m: usize) -> Result<Self> {
        self.reparam = reparametrize(&self, eps, m)?;
        Ok(self)
    }

    /// Compares the dual derivatives with fourth-order differences of the
    /// sampled profile.
    fn cross_check(&self) -> Result<()> {
        let n = self.t.len();
        if n < 5 {
            return Ok(());
        }
        let h = self.t[1] - self.t[0];
        let d1 = |f: &[f64], k: usize| (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h);
        let mut worst = 0.0_f64;
        for k in 2..n - 2 {
            let e1 = (d1(&self.psi, k) - self.dpsi[k]).abs() / self.dpsi[k].abs().max(1.0);
            let e2 = (d1(&self.dpsi, k) - self.ddpsi[k]).abs() / self.ddpsi[k].abs().max(1.0);
            worst = worst.max(e1).max(e2);
        }
        if worst > JET_CROSSCHECK_TOL || worst.is_nan() {
            return Err(Error::Numerical(format!("weight derivative cross-check disagrees by {worst:e}")));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn interval(&self, t: f64) -> (usize, f64) {
        let h = self.t[1] - self.t[0];
        let k = ((t / h).floor() as usize).min(self.t.len() - 2);
        (k, h)
    }

    /// `(ψ, ψ′, ψ″)` at any `t` on the horizon.
    pub fn psi_at(&self, t: f64) -> [f64; 3] {
        let t = t.clamp(0.0, self.horizon());
        let (k, h) = self.interval(t);
        let a = [self.psi[k], self.dpsi[k], self.ddpsi[k]];
        let b = [self.psi[k + 1], self.dpsi[k + 1], self.ddpsi[k + 1]];
        quintic((t - self.t[k]) / h, h, a, b)
    }

    /// `φ′(t) = exp(rate·ψ(t))`.
    pub fn dphi_at(&self, t: f64) -> f64 {
        if self.reparam.rate == 0.0 {
            return 1.0;
        }
        (self.reparam.rate * self.psi_at(t)[0]).exp()
    }

    pub fn phi_at(&self, t: f64) -> f64 {
        if self.reparam.rate == 0.0 {
            return t;
        }
        let t = t.clamp(0.0, self.horizon());
        let (k, _) = self.interval(t);
        let tail = integrate_gk(|s| self.dphi_at(s), self.t[k], t, 1e-12).unwrap_or(f64::NAN);
        self.reparam.phi[k] + tail
    }

    /// `φ⁻¹(τ)` by Hermite initial guess and Newton refinement.
    pub fn phi_inv(&self, tau: f64) -> f64 {
        if self.reparam.rate == 0.0 {
            return tau;
        }
        let phi = &self.reparam.phi;
        let tau = tau.clamp(0.0, *phi.last().unwrap());
        let k = match phi.binary_search_by(|p| p.partial_cmp(&tau).unwrap()) {
            Ok(i) => return self.t[i],
            Err(i) => i.clamp(1, phi.len() - 1) - 1,
        };
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        // linear guess, then Newton on φ(t) = τ, safeguarded to the bracket
        let mut t = t0 + (t1 - t0) * (tau - phi[k]) / (phi[k + 1] - phi[k]);
        for _ in 0..50 {
            let f = self.phi_at(t) - tau;
            let step = f / self.dphi_at(t);
            t = (t - step).clamp(t0, t1);
            if step.abs() < 1e-14 * t.max(1.0) {
                break;
            }
        }
        t
    }

    /// `(inf, sup)` of `exp(−rate·ψ)` over the grid.
    pub fn factor_range(&self) -> (f64, f64) {
        let r = self.reparam.rate;
        self.psi.iter().map(|p| (-r * p).exp()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)))
    }

    /// CSV with columns `t, psi, dpsi, ddpsi, phi`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = ["t", "psi", "dpsi", "ddpsi", "phi"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<f64>> = (0..self.t.len())
            .map(|k| vec![self.t[k], self.psi[k], self.dpsi[k], self.ddpsi[k], self.reparam.phi[k]])
            .collect();
        write_csv(path, &header, &rows)
    }
}

/// `φ_η(t) = ∫₀ᵗ exp(2(ε−1)ψ_η(s)/m) ds` on the profile grid; exactly the
/// identity for `ε = 1`.
pub fn reparametrize(weight: &WeightAlongGeodesic, eps: f64, m: usize) -> Result<Reparametrization> {
    let rate = 2.0 * (eps - 1.0) / m as f64;
    let n = weight.t.len();
    if rate == 0.0 || weight.psi.iter().all(|p| *p == 0.0) {
        return Ok(Reparametrization {
            eps,
            rate: if rate == 0.0 { 0.0 } else { rate },
            phi: weight.t.clone(),
            dphi: vec![1.0; n],
            completeness: weight.horizon(),
        });
    }
    let mut tmp = weight.clone();
    tmp.reparam = Reparametrization { eps, rate, phi: vec![], dphi: vec![], completeness: 0.0 };
    let mut phi = vec![0.0; n];
    for k in 1..n {
        phi[k] = phi[k - 1] + integrate_gk(|s| tmp.dphi_at(s), weight.t[k - 1], weight.t[k], 1e-12)?;
    }
    let dphi = weight.psi.iter().map(|p| (rate * p).exp()).collect();
    let completeness = phi[n - 1];
    Ok(Reparametrization { eps, rate, phi, dphi, completeness })
}

/// `ψ_m` of the measure `ρ dx` along a path.
pub fn weight_from_density<L: Lagrangian + Clone>(
    space: &ChartedSpace<L>,
    density: &Expr,
    path: &GeodesicPath,
    samples: usize,
) -> Result<WeightAlongGeodesic> {
    for x in &path.points {
        let rho: f64 = density.eval_point(x);
        if !(rho > 0.0) {
            return Err(Error::NonPositiveDensity { point: x.clone() });
        }
    }
    let weighted = space.clone().with_weight(Weight::Density(density.clone()));
    WeightAlongGeodesic::new(&weighted, path, 1.0, samples)
}

/// `Ric_N(v) = Ric(v) + ψ″ − ψ′²/(N − n)`; `−∞` at `N = n` when `ψ′ ≠ 0`.
pub fn weighted_ricci<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64], n_eff: NValue) -> Result<f64> {
    let ric = ricci_scalar(space, x, v)?;
    let [_, d1, d2] = psi_jet(space, x, v)?;
    Ok(combine_ricci(ric, d1, d2, n_eff, space.ricci_n()))
}

/// `Ric_N` from its ingredients.
pub fn combine_ricci(ric: f64, dpsi: f64, ddpsi: f64, n_eff: NValue, n: usize) -> f64 {
    match n_eff.inverse_gap(n) {
        Some(ig) => ric + ddpsi - dpsi * dpsi * ig,
        None if dpsi == 0.0 => ric + ddpsi,
        None => f64::NEG_INFINITY,
    }
}

/// Largest decrease along the chain `Ric_n ≤ Ric_N ≤ Ric_∞ ≤ Ric_{N′} ≤ Ric_{N₀}`
/// of `(N, Ric_N)` pairs, relative to `max(1, |Ric_N|)`; zero when it holds.
pub fn chain_violation(values: &[(NValue, f64)], n: usize) -> f64 {
    let key = |x: NValue| match x {
        NValue::Finite(v) if v >= n as f64 => (0u8, v),
        NValue::Finite(v) => (2, v),
        _ => (1, 0.0),
    };
    let mut v = values.to_vec();
    v.sort_by(|a, b| key(a.0).partial_cmp(&key(b.0)).unwrap());
    let mut worst = 0.0_f64;
    for w in v.windows(2) {
        let (lo, hi) = (w[0].1, w[1].1);
        if lo == f64::NEG_INFINITY {
            continue;
        }
        worst = worst.max((lo - hi) / lo.abs().max(hi.abs()).max(1.0));
    }
    worst
}

/// Checks the monotonicity chain of `Ric_N` in `N` at each sample.
pub fn monotonicity_check<L: Lagrangian>(space: &ChartedSpace<L>, samples: &[(Vec<f64>, Vec<f64>)], n_list: &[NValue]) -> CheckReport {
    const NAME: &str = "monotonicity";
    let n = space.ricci_n();
    for &nv in n_list {
        if let Err(e) = epsilon_bound(space.dim(), space.signature(), nv) {
            return CheckReport::rejected(NAME, e.to_string());
        }
    }
    let mut grid = Vec::new();
    let mut res = Vec::new();
    for (k, (x, v)) in samples.iter().enumerate() {
        let parts = ricci_scalar(space, x, v).and_then(|r| psi_jet(space, x, v).map(|j| (r, j)));
        let (ric, [_, d1, d2]) = match parts {
            Ok(p) => p,
            Err(e) => return CheckReport::numerical_error(NAME, e.to_string()),
        };
        let values: Vec<(NValue, f64)> = n_list.iter().map(|&nv| (nv, combine_ricci(ric, d1, d2, nv, n))).collect();
        grid.push(k as f64);
        res.push(chain_violation(&values, n));
    }
    CheckReport::from_residuals(NAME, grid, res, 1e-12).value("samples", samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;


    use crate::geodesic::{integrate_geodesic, unit_speed};
    use crate::tensor::sample_admissible;
    use crate::zoo;
    use rand::SeedableRng;

    #[test]
    fn gaussian_profile_matches_hand_calculus() {
        let lam = 0.7;
        let s = zoo::gaussian_weighted_euclidean(3, lam);
        let (x, v) = ([0.3, -0.2, 0.5], [0.6, 0.8, 0.0]);
        let p = integrate_geodesic(&s, &x, &v, 2.0, 1e-10).unwrap();
        let w = WeightAlongGeodesic::new(&s, &p, 1.0, 100).unwrap();
        for (k, &t) in w.t.iter().enumerate() {
            let y: Vec<f64> = (0..3).map(|i| x[i] + t * v[i]).collect();
            let r2: f64 = y.iter().map(|c| c * c).sum();
            let xv: f64 = (0..3).map(|i| y[i] * v[i]).sum();
            assert!((w.psi[k] - 0.5 * lam * r2).abs() < 1e-9);
            assert!((w.dpsi[k] - lam * xv).abs() < 1e-9);
            assert!((w.ddpsi[k] - lam).abs() < 1e-9);
        }
        let [a, b, c] = w.psi_at(0.777);
        let y: Vec<f64> = (0..3).map(|i| x[i] + 0.777 * v[i]).collect();
        assert!((a - 0.5 * lam * y.iter().map(|c| c * c).sum::<f64>()).abs() < 1e-9);
        assert!((b - lam * (0..3).map(|i| y[i] * v[i]).sum::<f64>()).abs() < 1e-8);
        assert!((c - lam).abs() < 1e-6);
    }

    #[test]
    fn density_weights() {
        let e = zoo::euclidean(2);
        let p = integrate_geodesic(&e, &[0.1, 0.2], &[1.0, 0.5], 1.5, 1e-10).unwrap();
        let w = weight_from_density(&e, &Expr::parse("1").unwrap(), &p, 50).unwrap();
        assert!(w.psi.iter().all(|v| v.abs() < 1e-15));
        let g = weight_from_density(&e, &Expr::parse("exp(-0.5*(x0^2+x1^2))").unwrap(), &p, 50).unwrap();
        assert!(g.ddpsi.iter().all(|v| (v - 1.25).abs() < 1e-9));
        let bad = Expr::parse("x0").unwrap();
        let q = integrate_geodesic(&e, &[-1.0, 0.0], &[1.0, 0.0], 2.0, 1e-10).unwrap();
        assert!(matches!(weight_from_density(&e, &bad, &q, 10), Err(Error::NonPositiveDensity { .. })));
        // Riemannian volume of the sphere chart: ρ = (2/(1+|x|²))²
        let s = zoo::sphere(2);
        let v = unit_speed(&s, &[0.2, 0.1], &[1.0, 0.4]).unwrap();
        let p = integrate_geodesic(&s, &[0.2, 0.1], &v, 2.0, 1e-10).unwrap();
        let w = weight_from_density(&s, &Expr::parse("(2/(1+x0^2+x1^2))^2").unwrap(), &p, 50).unwrap();
        assert!(w.psi.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn reparametrization_cases() {
        let s = zoo::gaussian_weighted_euclidean(3, 0.5);
        let p = integrate_geodesic(&s, &[0.2, 0.0, 0.1], &[0.0, 1.0, 0.0], 3.0, 1e-10).unwrap();
        let w = WeightAlongGeodesic::new(&s, &p, 1.0, 120).unwrap();
        assert_eq!(w.reparam.phi, w.t);
        let w = w.with_eps(0.0, 2).unwrap();
        // φ′ = exp(−ψ), ψ = (0.05 + t²)/4
        let exact = integrate_gk(|t| (-(0.05 + t * t) / 4.0).exp(), 0.0, 3.0, 1e-14).unwrap();
        assert!((w.reparam.completeness - exact).abs() < 1e-9 * exact);
        for &t in &[0.0, 0.3, 1.7, 2.99] {
            assert!((w.phi_inv(w.phi_at(t)) - t).abs() < 1e-9);
        }
        for (k, &t) in w.t.iter().enumerate() {
            assert!((w.phi_inv(w.reparam.phi[k]) - t).abs() < 1e-7);
        }
        let (lo, hi) = w.factor_range();
        assert!((lo - (0.05f64 / 4.0).exp()).abs() < 1e-12 && hi > lo);
        // constant ψ
        let c = zoo::euclidean(2).with_weight(Weight::Expr(Expr::parse("0.3").unwrap()));
        let p = integrate_geodesic(&c, &[0.0, 0.0], &[1.0, 0.0], 2.0, 1e-10).unwrap();
        let w = WeightAlongGeodesic::new(&c, &p, 0.5, 40).unwrap();
        assert!((w.reparam.completeness - 2.0 * (-0.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn weighted_ricci_closed_forms() {
        let s = zoo::sphere(3);
        let v = unit_speed(&s, &[0.1, 0.2, 0.0], &[1.0, 0.0, 0.3]).unwrap();
        for n in [NValue::Finite(3.0), NValue::Finite(5.0), NValue::PlusInfinity, NValue::Finite(-2.0)] {
            assert!((weighted_ricci(&s, &[0.1, 0.2, 0.0], &v, n).unwrap() - 2.0).abs() < 1e-10);
        }
        let lam = 0.4;
        let g = zoo::gaussian_weighted_euclidean(3, lam);
        let (x, v) = ([0.5, 0.1, -0.3], [1.0, 2.0, 0.5]);
        let v2: f64 = v.iter().map(|c| c * c).sum();
        let xv: f64 = (0..3).map(|i| x[i] * v[i]).sum();
        assert!((weighted_ricci(&g, &x, &v, NValue::PlusInfinity).unwrap() - lam * v2).abs() < 1e-12);
        for nn in [4.0, 7.0, 1.0, -3.0] {
            let r = weighted_ricci(&g, &x, &v, NValue::Finite(nn)).unwrap();
            assert!((r - (lam * v2 - lam * lam * xv * xv / (nn - 3.0))).abs() < 1e-12);
        }
        assert_eq!(weighted_ricci(&g, &x, &v, NValue::Finite(3.0)).unwrap(), f64::NEG_INFINITY);
        let perp = [0.0, 0.3, 0.1];
        assert!((weighted_ricci(&g, &[0.0; 3], &perp, NValue::Finite(3.0)).unwrap() - lam * 0.1).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_chain() {
        let g = zoo::gaussian_weighted_euclidean(3, 0.8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<_> = (0..50).map(|_| sample_admissible(&g, &mut rng, 1.0)).collect();
        let list = [3.0, 4.0, 10.0, f64::INFINITY, -5.0, 0.0, 1.0].map(NValue::from_f64);
        let r = monotonicity_check(&g, &samples, &list);
        assert!(r.passed(), "{r:?}");
        // flipped sign of the ψ′² term breaks the chain
        let flipped: Vec<(NValue, f64)> = list.iter().map(|&n| (n, 1.0 + 0.5 * n.inverse_gap(3).unwrap_or(0.0))).collect();
        assert!(chain_violation(&flipped, 3) > 0.0);
        let r = monotonicity_check(&g, &samples, &[NValue::Finite(2.0)]);
        assert_eq!(r.verdict, crate::report::Verdict::Rejected);
    }

    const P: Signature = Signature::Positive;
    const L: Signature = Signature::Lorentzian;

    #[test]
    fn constants_at_named_points() {
        let n = 3;
        // eps = 1 on [n, inf)
        for nn in [3.0, 4.0, 7.5] {
            let c = epsilon_range_constant(n, P, NValue::Finite(nn), 1.0).unwrap();
            assert!((c - 1.0 / (nn - 1.0)).abs() < 1e-15);
        }
        assert_eq!(epsilon_range_constant(n, P, NValue::Finite(1.0), 0.0).unwrap(), 0.5);
        for nn in [-3.0, 0.0, 0.5] {
            let eps = (nn - 1.0) / (nn - n as f64);
            let c = epsilon_range_constant(n, P, NValue::Finite(nn), eps).unwrap();
            assert!((c - 1.0 / (n as f64 - nn)).abs() < 1e-15, "N={nn}");
        }
        assert_eq!(epsilon_range_constant(4, L, NValue::Finite(0.0), 0.0).unwrap(), 1.0 / 3.0);
        let c = epsilon_range_constant(3, P, NValue::PlusInfinity, 0.5).unwrap();
        assert!((c - 0.375).abs() < 1e-15);
    }

    #[test]
    fn range_gates() {
        assert!(matches!(epsilon_range_constant(3, P, NValue::Finite(2.0), 0.0), Err(Error::ForbiddenN { .. })));
        assert!(matches!(epsilon_range_constant(3, L, NValue::Finite(1.0), 0.0), Err(Error::ForbiddenN { .. })));
        assert!(matches!(epsilon_range_constant(3, P, NValue::Finite(1.0), 0.1), Err(Error::EpsOutOfRange { .. })));
        assert!(matches!(epsilon_range_constant(3, P, NValue::PlusInfinity, 1.0), Err(Error::EpsOutOfRange { .. })));
        match epsilon_range_constant(3, P, NValue::Finite(5.0), 2.0) {
            Err(Error::EpsOutOfRange { range, .. }) => assert!(range.contains("1.414")),
            other => panic!("{other:?}"),
        }
        assert!(epsilon_range_constant(3, P, NValue::Finite(3.0), 1e6).is_ok());
    }

    #[test]
    fn c_is_continuous_at_n_equals_one() {
        let c1 = epsilon_range_constant(3, P, NValue::Finite(1.0), 0.0).unwrap();
        let c = epsilon_range_constant(3, P, NValue::Finite(1.0 - 1e-9), 0.0).unwrap();
        assert!((c - c1).abs() < 1e-12);
    }

    #[test]
    fn n_value_serde() {
        let v: Vec<NValue> = serde_json::from_str(r#"[3, 2.5, "inf", "-inf"]"#).unwrap();
        assert_eq!(v, vec![NValue::Finite(3.0), NValue::Finite(2.5), NValue::PlusInfinity, NValue::MinusInfinity]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[3.0,2.5,"inf","-inf"]"#);
    }
}
