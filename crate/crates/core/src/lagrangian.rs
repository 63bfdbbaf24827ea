//! Lagrangians on one coordinate chart. A [`ChartedSpace`] pairs one with
//! its weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg;
use crate::scalar::{hyper, Dual, Real};
use crate::zoo::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Positive,
    Lorentzian,
}

impl Signature {
    pub fn negative_eigenvalues(self) -> usize {
        match self {
            Signature::Positive => 0,
            Signature::Lorentzian => 1,
        }
    }
}

/// `L(x, v)`, with `L = F²/2` in the positive case.
pub trait Lagrangian: Send + Sync {
    fn dim(&self) -> usize;
    fn signature(&self) -> Signature;
    fn eval<S: Real>(&self, x: &[S], v: &[S]) -> S;
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

/// `g_ij = ∂²L/∂v^i∂v^j`, row-major, on any scalar type.
pub fn vertical_hessian<S: Real, L: Lagrangian>(lag: &L, x: &[S], v: &[S]) -> Vec<S> {
    let d = x.len();
    let xh: Vec<Dual<Dual<S>>> = x.iter().map(|&s| Dual::constant(Dual::constant(s))).collect();
    let mut g = vec![S::zero(); d * d];
    let mut vh: Vec<Dual<Dual<S>>> = v.iter().map(|&s| Dual::constant(Dual::constant(s))).collect();
    for i in 0..d {
        for j in i..d {
            for (k, slot) in vh.iter_mut().enumerate() {
                let a = if k == i { S::one() } else { S::zero() };
                let b = if k == j { S::one() } else { S::zero() };
                *slot = hyper(v[k], a, b);
            }
            let out = lag.eval(&xh, &vh);
            g[i * d + j] = out.du.du;
            g[j * d + i] = out.du.du;
        }
    }
    g
}

/// Weight function ψ on the slit tangent bundle (0-homogeneous in v).
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Weight {
    #[default]
    None,
    /// `ψ = λ|x|²/2` in chart coordinates.
    Gaussian { lambda: f64 },
    /// User expression in `x` and `v`.
    Expr(Expr),
    /// Weight of the measure `ρ dx`: `ψ = log(√|det g(v)| / ρ(x))`.
    Density(Expr),
}

impl Weight {
    pub fn is_none(&self) -> bool {
        matches!(self, Weight::None)
    }

    pub fn eval<S: Real, L: Lagrangian>(&self, lag: &L, x: &[S], v: &[S]) -> S {
        match self {
            Weight::None => S::zero(),
            Weight::Gaussian { lambda } => {
                let r2 = x.iter().fold(S::zero(), |acc, &xi| acc + xi * xi);
                r2.scale(0.5 * lambda)
            }
            Weight::Expr(e) => e.eval(x, v),
            Weight::Density(rho) => {
                let d = x.len();
                let g = vertical_hessian(lag, x, v);
                let det = linalg::det(&g, d).abs();
                det.ln().scale(0.5) - rho.eval_point(x).ln()
            }
        }
    }
}

/// A Lagrangian on a chart together with its weight and, for spacetimes,
/// a constant time-orientation vector.
#[derive(Clone, Debug)]
pub struct ChartedSpace<L = Model> {
    pub name: String,
    pub lagrangian: L,
    pub weight: Weight,
    pub orientation: Option<Vec<f64>>,
    pub cone_margin: f64,
}

impl<L: Lagrangian> ChartedSpace<L> {
    pub fn new(name: impl Into<String>, lagrangian: L) -> Self {
        ChartedSpace { name: name.into(), lagrangian, weight: Weight::None, orientation: None, cone_margin: 1e-6 }
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_orientation(mut self, x: Vec<f64>) -> Self {
        self.orientation = Some(x);
        self
    }

    pub fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    pub fn signature(&self) -> Signature {
        self.lagrangian.signature()
    }

    pub fn is_lorentzian(&self) -> bool {
        self.signature() == Signature::Lorentzian
    }

    /// Transverse dimension `m = dim − 1`.
    pub fn transverse_dim(&self) -> usize {
        self.dim() - 1
    }

    /// The `n` of the weighted Ricci denominator `N − n`: the dimension in
    /// the positive case, the spatial dimension for spacetimes.
    pub fn ricci_n(&self) -> usize {
        match self.signature() {
            Signature::Positive => self.dim(),
            Signature::Lorentzian => self.dim() - 1,
        }
    }

    pub fn lagrangian_at(&self, x: &[f64], v: &[f64]) -> f64 {
        self.lagrangian.eval(x, v)
    }

    pub fn weight_at(&self, x: &[f64], v: &[f64]) -> f64 {
        self.weight.eval(&self.lagrangian, x, v)
    }

    /// Time orientation `X`; defaults to `∂_0`.
    pub fn time_orientation(&self) -> Vec<f64> {
        self.orientation.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; self.dim()];
            e[0] = 1.0;
            e
        })
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() || !x.iter().all(|c| c.is_finite()) || !self.lagrangian.in_domain(x) {
            return Err(Error::OutsideChart { point: x.to_vec() });
        }
        Ok(())
    }

    /// Admissibility: nonzero (positive case) or timelike with margin.
    pub fn check_vector(&self, x: &[f64], v: &[f64]) -> Result<()> {
        self.check_point(x)?;
        if v.len() != self.dim() {
            return Err(Error::Inadmissible { reason: format!("vector has {} components, expected {}", v.len(), self.dim()) });
        }
        let norm2: f64 = v.iter().map(|c| c * c).sum();
        if norm2 == 0.0 || !norm2.is_finite() {
            return Err(Error::Inadmissible { reason: "zero vector".into() });
        }
        if self.is_lorentzian() {
            let l = self.lagrangian_at(x, v);
            if l > -self.cone_margin * norm2 {
                return Err(Error::Inadmissible {
                    reason: format!("L(v) = {l:e} is not timelike with margin {:e}", self.cone_margin),
                });
            }
        }
        Ok(())
    }
}
