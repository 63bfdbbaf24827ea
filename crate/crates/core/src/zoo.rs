//! Model spaces with closed-form geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lagrangian::{ChartedSpace, Lagrangian, Signature, Weight};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Warp {
    Cos,
    Cosh,
    Exp,
}

impl Warp {
    pub fn eval<S: Real>(self, t: S) -> S {
        match self {
            Warp::Cos => t.cos(),
            Warp::Cosh => t.cosh(),
            Warp::Exp => t.exp(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Warp::Cos => "cos",
            Warp::Cosh => "cosh",
            Warp::Exp => "exp",
        }
    }
}

/// Built-in Lagrangians plus the expression escape hatch.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Euclidean { n: usize },
    /// Unit sphere in the stereographic chart, `g = 4δ/(1+|x|²)²`.
    Sphere { n: usize },
    /// `g = 4δ/(1−|x|²)²` on the unit ball.
    PoincareBall { n: usize },
    /// `F = |v| + b v⁰` with constant drift `0 ≤ b < 1`.
    Randers { n: usize, b: f64 },
    /// `2L = −(v⁰)² + Σ(vⁱ)²` on `dim = n + 1`.
    Minkowski { dim: usize },
    /// `2L = −(v⁰)² + f(x⁰)² Σ(vⁱ)²`.
    Flrw { dim: usize, warp: Warp },
    /// `L = ½ r² cos kθ` on the plane.
    Beem { k: u32 },
    Expression { dim: usize, signature: Signature, lagrangian: Expr, domain: Option<Expr> },
}

fn sum_sq<S: Real>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, &c| acc + c * c)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Lagrangian for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Euclidean { n } | Model::Sphere { n } | Model::PoincareBall { n } | Model::Randers { n, .. } => *n,
            Model::Minkowski { dim } | Model::Flrw { dim, .. } | Model::Expression { dim, .. } => *dim,
            Model::Beem { .. } => 2,
        }
    }

    fn signature(&self) -> Signature {
        match self {
            Model::Euclidean { .. } | Model::Sphere { .. } | Model::PoincareBall { .. } | Model::Randers { .. } => {
                Signature::Positive
            }
            Model::Minkowski { .. } | Model::Flrw { .. } | Model::Beem { .. } => Signature::Lorentzian,
            Model::Expression { signature, .. } => *signature,
        }
    }

    fn eval<S: Real>(&self, x: &[S], v: &[S]) -> S {
        let half = S::from_f64(0.5);
        match self {
            Model::Euclidean { .. } => half * sum_sq(v),
            Model::Sphere { .. } => {
                let c = S::one() + sum_sq(x);
                sum_sq(v).scale(2.0) / (c * c)
            }
            Model::PoincareBall { .. } => {
                let c = S::one() - sum_sq(x);
                sum_sq(v).scale(2.0) / (c * c)
            }
            Model::Randers { b, .. } => {
                let f = sum_sq(v).sqrt() + v[0].scale(*b);
                half * f * f
            }
            Model::Minkowski { .. } => half * (sum_sq(&v[1..]) - v[0] * v[0]),
            Model::Flrw { warp, .. } => {
                let f = warp.eval(x[0]);
                half * (f * f * sum_sq(&v[1..]) - v[0] * v[0])
            }
            Model::Beem { k } => {
                let (p, q) = (v[0], v[1]);
                let mut re = S::zero();
                for j in (0..=*k).step_by(2) {
                    let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    re += (p.powi((k - j) as i32) * q.powi(j as i32)).scale(sign * binomial(*k, j));
                }
                let r2 = p * p + q * q;
                let denom = if k % 2 == 0 { r2.powi((*k as i32 - 2) / 2) } else { r2.powf_const((*k as f64 - 2.0) / 2.0) };
                half * re / denom
            }
            Model::Expression { lagrangian, .. } => lagrangian.eval(x, v),
        }
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        match self {
            Model::PoincareBall { .. } => x.iter().map(|c| c * c).sum::<f64>() < 1.0 - 1e-12,
            Model::Flrw { warp: Warp::Cos, .. } => x[0].abs() < PI / 2.0,
            Model::Expression { domain: Some(d), .. } => d.eval_point(x) > 0.0,
            _ => true,
        }
    }
}

pub fn euclidean(n: usize) -> ChartedSpace {
    ChartedSpace::new(format!("euclidean({n})"), Model::Euclidean { n })
}

pub fn sphere(n: usize) -> ChartedSpace {
    ChartedSpace::new(format!("sphere({n})"), Model::Sphere { n })
}

pub fn poincare_ball(n: usize) -> ChartedSpace {
    ChartedSpace::new(format!("poincare_ball({n})"), Model::PoincareBall { n })
}

pub fn randers(n: usize, b: f64) -> Result<ChartedSpace> {
    if !(0.0..1.0).contains(&b.abs()) || !b.is_finite() {
        return Err(Error::InvalidParam { param: "b".into(), message: format!("drift |b| = {b} must be < 1") });
    }
    Ok(ChartedSpace::new(format!("randers({n}, b={b})"), Model::Randers { n, b }))
}

pub fn gaussian_weighted_euclidean(n: usize, lambda: f64) -> ChartedSpace {
    ChartedSpace::new(format!("gaussian_weighted_euclidean({n}, lambda={lambda})"), Model::Euclidean { n })
        .with_weight(Weight::Gaussian { lambda })
}

/// Minkowski spacetime with `n` spatial dimensions.
pub fn minkowski(n: usize) -> ChartedSpace {
    ChartedSpace::new(format!("minkowski({})", n + 1), Model::Minkowski { dim: n + 1 })
}

pub fn weighted_minkowski(n: usize, lambda: f64) -> ChartedSpace {
    ChartedSpace::new(format!("weighted_minkowski({}, lambda={lambda})", n + 1), Model::Minkowski { dim: n + 1 })
        .with_weight(Weight::Gaussian { lambda })
}

pub fn flrw(n: usize, warp: Warp) -> ChartedSpace {
    ChartedSpace::new(format!("flrw({}, {})", n + 1, warp.name()), Model::Flrw { dim: n + 1, warp })
}

pub fn beem(k: u32) -> Result<ChartedSpace> {
    if k < 2 {
        return Err(Error::InvalidParam { param: "k".into(), message: format!("k = {k} must be at least 2") });
    }
    let axis = PI / k as f64;
    Ok(ChartedSpace::new(format!("beem({k})"), Model::Beem { k }).with_orientation(vec![axis.cos(), axis.sin()]))
}

/// Family parameters accepted by [`build_zoo`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZooParams {
    /// Dimension (positive spaces) or spatial dimension (spacetimes).
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub warp: Option<Warp>,
    #[serde(default)]
    pub k: Option<u32>,
}

pub const ZOO: [(&str, &str); 9] = [
    ("euclidean", "flat R^n, L = |v|^2/2 (param n)"),
    ("sphere", "unit sphere S^n in the stereographic chart (param n)"),
    ("poincare_ball", "hyperbolic space in the Poincare ball chart (param n)"),
    ("randers", "Randers F = |v| + b v^0 with constant drift b < 1 (params n, b)"),
    ("gaussian_weighted_euclidean", "R^n with weight lambda |x|^2 / 2 (params n, lambda)"),
    ("minkowski", "Minkowski spacetime of dimension n+1 (param n)"),
    ("weighted_minkowski", "Minkowski with weight lambda |x|^2 / 2 (params n, lambda)"),
    ("flrw", "-(v^0)^2 + f(x^0)^2 |v|^2 with f in {cos, cosh, exp} (params n, warp)"),
    ("beem", "L = r^2 cos(k theta) / 2 on the plane (param k)"),
];

pub fn available() -> String {
    ZOO.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

pub fn build_zoo(name: &str, p: &ZooParams) -> Result<ChartedSpace> {
    let n = |default: usize| -> Result<usize> {
        let n = p.n.unwrap_or(default);
        if n == 0 {
            return Err(Error::InvalidParam { param: "n".into(), message: "dimension must be positive".into() });
        }
        Ok(n)
    };
    let positive_n = |default: usize| -> Result<usize> {
        let n = n(default)?;
        if n < 2 {
            return Err(Error::InvalidParam { param: "n".into(), message: "positive spaces need n >= 2".into() });
        }
        Ok(n)
    };
    let lambda = || -> Result<f64> {
        let l = p.lambda.unwrap_or(1.0);
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParam { param: "lambda".into(), message: format!("{l} must be positive") });
        }
        Ok(l)
    };
    match name {
        "euclidean" => Ok(euclidean(positive_n(2)?)),
        "sphere" => Ok(sphere(positive_n(2)?)),
        "poincare_ball" => Ok(poincare_ball(positive_n(2)?)),
        "randers" => randers(positive_n(2)?, p.b.unwrap_or(0.3)),
        "gaussian_weighted_euclidean" => Ok(gaussian_weighted_euclidean(positive_n(2)?, lambda()?)),
        "minkowski" => Ok(minkowski(n(1)?)),
        "weighted_minkowski" => Ok(weighted_minkowski(n(1)?, lambda()?)),
        "flrw" => Ok(flrw(n(1)?, p.warp.unwrap_or(Warp::Cos))),
        "beem" => beem(p.k.unwrap_or(4)),
        other => Err(Error::UnknownSpace { name: other.into(), available: available() }),
    }
}

/// All nine families at small default dimensions.
pub fn all_default() -> Vec<ChartedSpace> {
    ZOO.iter().map(|(name, _)| build_zoo(name, &ZooParams::default()).expect("defaults are valid")).collect()
}
