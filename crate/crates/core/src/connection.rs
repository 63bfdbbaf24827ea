//! Formal Christoffel symbols, the geodesic spray, the nonlinear and Chern
//! connections, and covariant derivatives with a reference vector.
//!
//! The spray is computed from the Euler–Lagrange equation,
//! `G^i = ½ g^{il}(∂_{x^k}∂_{v^l}L v^k − ∂_{x^l}L)`, on any scalar type, so
//! that its derivatives come out of one more layer of dual numbers.

use crate::error::{Error, Result};
use crate::lagrangian::{vertical_hessian, ChartedSpace, Lagrangian};
use crate::linalg;
use crate::scalar::{hyper, Dual, Real};
use crate::tensor::{cartan_unchecked, fundamental_tensor};

/// `G^i(x, v)`. `None` if the fundamental tensor is singular.
pub fn spray<S: Real, L: Lagrangian>(lag: &L, x: &[S], v: &[S]) -> Option<Vec<S>> {
    let d = x.len();
    if v.iter().all(|c| c.value() == 0.0) {
        // G(0) = 0 by convention
        return Some(vec![S::zero(); d]);
    }
    let g = vertical_hessian(lag, x, v);
    let z = S::zero();
    let mut rhs = vec![z; d];
    let xd: Vec<Dual<S>> = x.iter().map(|&c| Dual::constant(c)).collect();
    let vd: Vec<Dual<S>> = v.iter().map(|&c| Dual::constant(c)).collect();
    let xh: Vec<Dual<Dual<S>>> = x.iter().zip(v).map(|(&c, &vc)| hyper(c, vc, z)).collect();
    let mut vh: Vec<Dual<Dual<S>>> = v.iter().map(|&c| hyper(c, z, z)).collect();
    let mut xs = xd.clone();
    for l in 0..d {
        vh[l] = hyper(v[l], z, S::one());
        let mixed = lag.eval(&xh, &vh).du.du;
        vh[l] = hyper(v[l], z, z);
        xs[l] = Dual::new(x[l], S::one());
        let dx = lag.eval(&xs, &vd).du;
        xs[l] = xd[l];
        rhs[l] = mixed - dx;
    }
    let y = linalg::solve(&g, &rhs)?;
    Some(y.into_iter().map(|c| c.scale(0.5)).collect())
}

pub(crate) fn spray_f64<L: Lagrangian>(lag: &L, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    spray(lag, x, v).ok_or_else(|| Error::Numerical(format!("singular fundamental tensor at x = {x:?}, v = {v:?}")))
}

/// Spray and its directional derivative: `(G, ∂_x G·dx + ∂_v G·dv)`.
pub fn spray_directional<L: Lagrangian>(lag: &L, x: &[f64], v: &[f64], dx: &[f64], dv: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let xs: Vec<Dual<f64>> = x.iter().zip(dx).map(|(&a, &b)| Dual::new(a, b)).collect();
    let vs: Vec<Dual<f64>> = v.iter().zip(dv).map(|(&a, &b)| Dual::new(a, b)).collect();
    let g = spray(lag, &xs, &vs).ok_or_else(|| Error::Numerical("singular fundamental tensor".into()))?;
    Ok((g.iter().map(|c| c.re).collect(), g.iter().map(|c| c.du).collect()))
}

/// `N^i_j = ∂G^i/∂v^j`, row-major, together with `G`.
pub fn nonlinear_connection<L: Lagrangian>(lag: &L, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = x.len();
    let mut n = vec![0.0; d * d];
    let mut g0 = vec![0.0; d];
    let zero = vec![0.0; d];
    for j in 0..d {
        let mut e = zero.clone();
        e[j] = 1.0;
        let (g, dg) = spray_directional(lag, x, v, &zero, &e)?;
        g0 = g;
        for i in 0..d {
            n[i * d + j] = dg[i];
        }
    }
    Ok((g0, n))
}

/// The full connection hierarchy at `(x, v)`; rank-3 arrays are flattened as
/// `a[(i*d + j)*d + k]` for `a^i_jk`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionData {
    pub gamma: Vec<f64>,
    pub spray: Vec<f64>,
    pub nonlinear: Vec<f64>,
    pub chern: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl ConnectionData {
    pub fn dim(&self) -> usize {
        self.spray.len()
    }

    /// `Γ^i_jk(ref) a^j b^k`.
    pub fn chern_apply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..d {
                    for k in 0..d {
                        s += self.chern[(i * d + j) * d + k] * a[j] * b[k];
                    }
                }
                s
            })
            .collect()
    }
}

/// `∂g_ij/∂x^k` flattened as `dg[(i*d + j)*d + k]`.
fn metric_x_derivatives<L: Lagrangian>(lag: &L, x: &[f64], v: &[f64]) -> Vec<f64> {
    let d = x.len();
    let vs: Vec<Dual<f64>> = v.iter().map(|&c| Dual::constant(c)).collect();
    let mut dg = vec![0.0; d * d * d];
    for k in 0..d {
        let xs: Vec<Dual<f64>> = x.iter().enumerate().map(|(i, &c)| Dual::new(c, if i == k { 1.0 } else { 0.0 })).collect();
        let g = vertical_hessian(lag, &xs, &vs);
        for ij in 0..d * d {
            dg[ij * d + k] = g[ij].du;
        }
    }
    dg
}

pub fn connection_at<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<ConnectionData> {
    let metric = fundamental_tensor(space, x, v)?;
    let d = space.dim();
    let ginv = metric.matrix.clone().try_inverse().ok_or_else(|| Error::Numerical("singular fundamental tensor".into()))?;
    let dg = metric_x_derivatives(&space.lagrangian, x, v);
    let dgx = |i: usize, j: usize, k: usize| dg[(i * d + j) * d + k];
    let mut gamma = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += ginv[(i, l)] * (dgx(l, k, j) + dgx(j, l, k) - dgx(j, k, l));
                }
                gamma[(i * d + j) * d + k] = 0.5 * s;
            }
        }
    }
    let (spray, nonlinear) = nonlinear_connection(&space.lagrangian, x, v)?;
    let c = cartan_unchecked(space, x, v);
    let cc = |i: usize, j: usize, k: usize| c[(i * d + j) * d + k];
    let nn = |i: usize, j: usize| nonlinear[i * d + j];
    let mut chern = gamma.clone();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    let mut t = 0.0;
                    for m in 0..d {
                        t += cc(l, k, m) * nn(m, j) + cc(j, l, m) * nn(m, k) - cc(j, k, m) * nn(m, l);
                    }
                    s += ginv[(i, l)] * t;
                }
                chern[(i * d + j) * d + k] -= s;
            }
        }
    }
    Ok(ConnectionData { gamma, spray, nonlinear, chern, x: x.to_vec(), v: v.to_vec() })
}

fn check_reference<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], reference: &[f64]) -> Result<()> {
    if reference.iter().all(|c| *c == 0.0) {
        return Err(Error::Inadmissible { reason: "reference vector is zero".into() });
    }
    space.check_vector(x, reference)
}

/// `D_v^{ref} X` for a vector field `X` on the chart, given as a function
/// evaluable on dual numbers so that `v^j ∂_j X` is exact.
pub fn covariant_derivative<L, F>(space: &ChartedSpace<L>, x: &[f64], field: F, v: &[f64], reference: &[f64]) -> Result<Vec<f64>>
where
    L: Lagrangian,
    F: Fn(&[Dual<f64>]) -> Vec<Dual<f64>>,
{
    check_reference(space, x, reference)?;
    let conn = connection_at(space, x, reference)?;
    let xs: Vec<Dual<f64>> = x.iter().zip(v).map(|(&a, &b)| Dual::new(a, b)).collect();
    let xv = field(&xs);
    let value: Vec<f64> = xv.iter().map(|c| c.re).collect();
    let dir: Vec<f64> = xv.iter().map(|c| c.du).collect();
    let gam = conn.chern_apply(v, &value);
    Ok(dir.iter().zip(gam).map(|(a, b)| a + b).collect())
}

/// `D_{η̇}^{ref} X` for a field along a curve, given its value and its
/// coordinate derivative `Ẋ` at the point.
pub fn covariant_derivative_along<L: Lagrangian>(
    space: &ChartedSpace<L>,
    x: &[f64],
    velocity: &[f64],
    value: &[f64],
    value_dot: &[f64],
    reference: &[f64],
) -> Result<Vec<f64>> {
    check_reference(space, x, reference)?;
    let conn = connection_at(space, x, reference)?;
    let gam = conn.chern_apply(velocity, value);
    Ok(value_dot.iter().zip(gam).map(|(a, b)| a + b).collect())
}
