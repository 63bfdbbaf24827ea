//! Mixed partial derivatives of scalar fields on the tangent bundle.
//!
//! The primary route nests dual numbers, one level per derivative slot, and
//! is exact up to roundoff for every order up to four. A Richardson central
//! difference route is kept as an independent estimator.

use crate::error::{Error, Result};
use crate::lagrangian::{ChartedSpace, Lagrangian};
use crate::scalar::{Dual, Real};

/// Scalar field `f(x, v)` evaluable on any scalar type.
pub trait TangentField: Sync {
    fn eval<S: Real>(&self, x: &[S], v: &[S]) -> S;
}

impl<L: Lagrangian> TangentField for L {
    fn eval<S: Real>(&self, x: &[S], v: &[S]) -> S {
        Lagrangian::eval(self, x, v)
    }
}

/// The weight of a space as a field.
pub struct WeightField<'a, L>(pub &'a ChartedSpace<L>);

impl<L: Lagrangian> TangentField for WeightField<'_, L> {
    fn eval<S: Real>(&self, x: &[S], v: &[S]) -> S {
        self.0.weight.eval(&self.0.lagrangian, x, v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    X(usize),
    V(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub error_estimate: f64,
}

type D1 = Dual<f64>;
type D2 = Dual<D1>;
type D3 = Dual<D2>;
type D4 = Dual<D3>;

/// Evaluates `f` with coordinate `x_i` seeded `x_i + Σ_l dx[l][i] ε_l` and
/// likewise for `v`, returning the requested coefficient.
pub fn seeded_eval<S: Real, F: TangentField>(
    f: &F,
    x: &[f64],
    v: &[f64],
    dx: &[Vec<f64>],
    dv: &[Vec<f64>],
    levels: &[bool],
) -> f64 {
    let lift = |base: &[f64], dirs: &[Vec<f64>]| -> Vec<S> {
        base.iter()
            .enumerate()
            .map(|(i, &b)| {
                let seeds: Vec<f64> = dirs.iter().map(|d| d[i]).collect();
                S::seeded(b, &seeds)
            })
            .collect()
    };
    let xs = lift(x, dx);
    let vs = lift(v, dv);
    f.eval(&xs, &vs).coefficient(levels)
}

fn slot_dirs(slots: &[Slot], dim: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut dx = vec![vec![0.0; dim]; slots.len()];
    let mut dv = vec![vec![0.0; dim]; slots.len()];
    for (l, s) in slots.iter().enumerate() {
        match *s {
            Slot::X(i) => dx[l][i] = 1.0,
            Slot::V(i) => dv[l][i] = 1.0,
        }
    }
    (dx, dv)
}

/// Exact mixed partial `∂^k f / ∂(slots)` at `(x, v)`.
pub fn partial<F: TangentField>(f: &F, x: &[f64], v: &[f64], slots: &[Slot]) -> Result<f64> {
    let (dx, dv) = slot_dirs(slots, x.len());
    let all = vec![true; slots.len()];
    Ok(match slots.len() {
        0 => seeded_eval::<f64, F>(f, x, v, &dx, &dv, &all),
        1 => seeded_eval::<D1, F>(f, x, v, &dx, &dv, &all),
        2 => seeded_eval::<D2, F>(f, x, v, &dx, &dv, &all),
        3 => seeded_eval::<D3, F>(f, x, v, &dx, &dv, &all),
        4 => seeded_eval::<D4, F>(f, x, v, &dx, &dv, &all),
        k => return Err(Error::OrderTooHigh { order: k }),
    })
}

fn check_slots(dim: usize, slots: &[Slot]) -> Result<()> {
    if slots.len() > 4 {
        return Err(Error::OrderTooHigh { order: slots.len() });
    }
    for s in slots {
        let (Slot::X(i) | Slot::V(i)) = *s;
        if i >= dim {
            return Err(Error::InvalidParam { param: "multi_index".into(), message: format!("index {i} >= dim {dim}") });
        }
    }
    Ok(())
}

/// Mixed partial with a roundoff-level error estimate, validated against
/// the chart and the admissibility of `v`.
pub fn derive<L: Lagrangian, F: TangentField>(
    space: &ChartedSpace<L>,
    f: &F,
    x: &[f64],
    v: &[f64],
    slots: &[Slot],
    tol: Option<f64>,
) -> Result<Derivative> {
    check_slots(space.dim(), slots)?;
    space.check_vector(x, v)?;
    let value = partial(f, x, v, slots)?;
    let scale = 1.0 + value.abs() + partial(f, x, v, &[])?.abs();
    let d = Derivative { value, error_estimate: 64.0 * f64::EPSILON * scale };
    if let Some(tol) = tol {
        if d.error_estimate > tol || !value.is_finite() {
            return Err(Error::ToleranceExceeded { estimate: d.error_estimate, tol });
        }
    }
    Ok(d)
}

/// Central-difference route with one step halving. Returns the Richardson
/// extrapolated value and `|D(h) − D(h/2)|` plus a roundoff floor.
pub fn derive_fd<L: Lagrangian, F: TangentField>(
    space: &ChartedSpace<L>,
    f: &F,
    x: &[f64],
    v: &[f64],
    slots: &[Slot],
    tol: Option<f64>,
) -> Result<Derivative> {
    check_slots(space.dim(), slots)?;
    space.check_vector(x, v)?;
    let k = slots.len();
    if k == 0 {
        let value = f.eval(x, v);
        return Ok(Derivative { value, error_estimate: f64::EPSILON * value.abs() });
    }
    let base_step = f64::EPSILON.powf(1.0 / (k as f64 + 2.0));
    let steps: Vec<f64> = slots
        .iter()
        .map(|s| match *s {
            Slot::X(i) => base_step * x[i].abs().max(1.0),
            Slot::V(i) => base_step * v[i].abs().max(1.0),
        })
        .collect();
    let mut fmax = 0.0_f64;
    let mut diff = |scale: f64| -> f64 {
        let mut acc = 0.0;
        for mask in 0..(1usize << k) {
            let mut xs = x.to_vec();
            let mut vs = v.to_vec();
            let mut sign = 1.0;
            for (l, s) in slots.iter().enumerate() {
                let h = steps[l] * scale;
                let dir = if mask >> l & 1 == 1 { 1.0 } else { -1.0 };
                sign *= dir;
                match *s {
                    Slot::X(i) => xs[i] += dir * h,
                    Slot::V(i) => vs[i] += dir * h,
                }
            }
            let val = f.eval(&xs, &vs);
            fmax = fmax.max(val.abs());
            acc += sign * val;
        }
        let denom: f64 = steps.iter().map(|h| 2.0 * h * scale).product();
        acc / denom
    };
    let coarse = diff(1.0);
    let fine = diff(0.5);
    let value = (4.0 * fine - coarse) / 3.0;
    let hprod: f64 = steps.iter().map(|h| h * 0.5).product();
    let roundoff = 4.0 * (1u64 << k) as f64 * f64::EPSILON * fmax / hprod;
    let d = Derivative { value, error_estimate: (fine - coarse).abs() + roundoff };
    if let Some(tol) = tol {
        if d.error_estimate > tol {
            return Err(Error::ToleranceExceeded { estimate: d.error_estimate, tol });
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn euclidean_second_vertical_derivative_is_one() {
        let e = zoo::euclidean(3);
        let d = derive(&e, &e.lagrangian, &[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5], &[Slot::V(0), Slot::V(0)], None).unwrap();
        assert_eq!(d.value, 1.0);
        for i in 0..3 {
            let g = derive(&e, &e.lagrangian, &[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5], &[Slot::X(i)], None).unwrap();
            assert_eq!(g.value, 0.0);
        }
    }

    #[test]
    fn sphere_metric_x_derivative_matches_hand_formula() {
        // g11 = 4/(1+|x|^2)^2, ∂g11/∂x1 = -16 x1 /(1+|x|^2)^3
        let s = zoo::sphere(2);
        let x = [0.4, -0.3];
        let v = [0.7, 0.2];
        let d = derive(&s, &s.lagrangian, &x, &v, &[Slot::X(0), Slot::V(0), Slot::V(0)], None).unwrap();
        let r2 = 0.16 + 0.09;
        let expect = -16.0 * x[0] / (1.0 + r2).powi(3);
        assert!((d.value - expect).abs() < 1e-13, "{} vs {}", d.value, expect);
        let fd = derive_fd(&s, &s.lagrangian, &x, &v, &[Slot::X(0), Slot::V(0), Slot::V(0)], None).unwrap();
        assert!((fd.value - expect).abs() <= fd.error_estimate.max(1e-6));
    }

    #[test]
    fn order_and_domain_errors() {
        let e = zoo::euclidean(2);
        let s = [Slot::X(0); 5];
        assert!(matches!(derive(&e, &e.lagrangian, &[0.0, 0.0], &[1.0, 0.0], &s, None), Err(Error::OrderTooHigh { order: 5 })));
        let p = zoo::poincare_ball(2);
        assert!(matches!(
            derive(&p, &p.lagrangian, &[2.0, 0.0], &[1.0, 0.0], &[Slot::V(0)], None),
            Err(Error::OutsideChart { .. })
        ));
        let fd = derive_fd(&p, &p.lagrangian, &[0.3, 0.0], &[1.0, 0.0], &[Slot::X(0), Slot::X(0), Slot::X(0), Slot::X(1)], Some(1e-14));
        assert!(matches!(fd, Err(Error::ToleranceExceeded { .. })));
    }
}
