//! Fundamental and Cartan tensors, the Finsler norm, and sampled
//! homogeneity validation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lagrangian::{vertical_hessian, ChartedSpace, Lagrangian, Signature};
use crate::linalg;
use crate::report::CheckReport;
use crate::scalar::Dual;

/// Condition number above which a fundamental tensor counts as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

/// A tangent vector with its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub coords: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: &[f64], coords: &[f64]) -> Self {
        TangentVector { base: base.to_vec(), coords: coords.to_vec() }
    }
}

/// `g_ij(v)` together with its base `(x, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricAtVector {
    pub matrix: DMatrix<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl MetricAtVector {
    /// `g_v(a, b)` on raw components.
    pub fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.matrix[(i, j)] * a[i] * b[j];
            }
        }
        s
    }

    /// Lowers an index: `(g w)_i`.
    pub fn lower(&self, w: &[f64]) -> Vec<f64> {
        (&self.matrix * linalg::dvec(w)).iter().copied().collect()
    }
}

/// Vertical Hessian at `(x, v)` without admissibility or signature checks.
pub fn raw_metric<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> DMatrix<f64> {
    let g = vertical_hessian(&space.lagrangian, x, v);
    linalg::to_matrix(&g, space.dim())
}

/// Counts negative eigenvalues and checks the declared signature and the
/// condition number.
pub fn check_signature(matrix: &DMatrix<f64>, signature: Signature) -> Result<()> {
    let ev = linalg::sym_eigenvalues(matrix);
    let negative = ev.iter().filter(|&&e| e < 0.0).count();
    let expected = signature.negative_eigenvalues();
    if negative != expected {
        return Err(Error::SignatureMismatch { expected, negative });
    }
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), e| (lo.min(e.abs()), hi.max(e.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::Degenerate { condition });
    }
    Ok(())
}

pub fn fundamental_tensor<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<MetricAtVector> {
    space.check_vector(x, v)?;
    let matrix = raw_metric(space, x, v);
    let asym = linalg::max_abs(&(&matrix - matrix.transpose()));
    if asym > 1e-10 * linalg::max_abs(&matrix).max(1.0) {
        return Err(Error::Numerical(format!("fundamental tensor asymmetric by {asym:e}")));
    }
    check_signature(&matrix, space.signature())?;
    Ok(MetricAtVector { matrix, x: x.to_vec(), v: v.to_vec() })
}

/// `C_ijk = ½ ∂g_ij/∂v^k`, flattened as `c[(i*d + j)*d + k]`.
pub fn cartan_tensor<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    fundamental_tensor(space, x, v)?;
    Ok(cartan_unchecked(space, x, v))
}

pub(crate) fn cartan_unchecked<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Vec<f64> {
    let d = space.dim();
    let xs: Vec<Dual<f64>> = x.iter().map(|&c| Dual::constant(c)).collect();
    let mut c = vec![0.0; d * d * d];
    for k in 0..d {
        let vs: Vec<Dual<f64>> = v.iter().enumerate().map(|(i, &c)| Dual::new(c, if i == k { 1.0 } else { 0.0 })).collect();
        let g = vertical_hessian(&space.lagrangian, &xs, &vs);
        for ij in 0..d * d {
            c[ij * d + k] = 0.5 * g[ij].du;
        }
    }
    c
}

pub fn inner_product(g: &MetricAtVector, w1: &TangentVector, w2: &TangentVector) -> Result<f64> {
    if w1.base != g.x || w2.base != g.x {
        return Err(Error::MismatchedBase);
    }
    Ok(g.apply(&w1.coords, &w2.coords))
}

/// `F = √(2L)` (positive) or `F = √(−2L)` (Lorentzian, timelike only).
pub fn finsler_norm<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<f64> {
    space.check_point(x)?;
    let l = space.lagrangian_at(x, v);
    match space.signature() {
        Signature::Positive if l >= 0.0 => Ok((2.0 * l).sqrt()),
        Signature::Lorentzian if l < 0.0 => Ok((-2.0 * l).sqrt()),
        _ => Err(Error::WrongSign { value: l }),
    }
}

/// Random admissible `(x, v)`: `x` in a box shrunk into the chart, `v`
/// Gaussian-ish, filtered to the timelike cone for spacetimes.
pub fn sample_admissible<L: Lagrangian>(space: &ChartedSpace<L>, rng: &mut impl Rng, radius: f64) -> (Vec<f64>, Vec<f64>) {
    let d = space.dim();
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..radius)).collect();
        if space.check_point(&x).is_err() {
            continue;
        }
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if space.is_lorentzian() {
            // mix towards the orientation so the cone is hit with reasonable odds
            let axis = space.time_orientation();
            let s: f64 = rng.gen_range(0.5..2.0);
            for (vi, ai) in v.iter_mut().zip(&axis) {
                *vi = *vi * 0.6 + s * ai;
            }
        }
        if space.check_vector(&x, &v).is_ok() && fundamental_tensor(space, &x, &v).is_ok() {
            return (x, v);
        }
    }
}

/// Sampled residuals of 2-homogeneity of `L`, 0-homogeneity of `g`, and
/// the Euler contraction of the Cartan tensor. Failures are reported.
pub fn validate_homogeneity<L: Lagrangian>(space: &ChartedSpace<L>, sample_count: usize, rng_seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let d = space.dim();
    let (mut r_l, mut r_g, mut r_c, mut r_e) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut grid = Vec::new();
    let mut res = Vec::new();
    for s in 0..sample_count {
        let (x, v) = sample_admissible_loose(space, &mut rng);
        let c: f64 = rng.gen_range(0.5..2.0);
        let cv: Vec<f64> = v.iter().map(|a| c * a).collect();
        let l = space.lagrangian_at(&x, &v);
        let lc = space.lagrangian_at(&x, &cv);
        let dl = (lc - c * c * l).abs() / (c * c * l.abs()).max(1.0);
        let g = raw_metric(space, &x, &v);
        let gc = raw_metric(space, &x, &cv);
        let dg = linalg::max_abs(&(&gc - &g)) / linalg::max_abs(&g).max(1.0);
        let cart = cartan_unchecked(space, &x, &v);
        let mut dc = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| cart[(i * d + j) * d + k] * v[k]).sum();
                dc = dc.max(s.abs());
            }
        }
        let gvv = MetricAtVector { matrix: g, x: x.clone(), v: v.clone() }.apply(&v, &v);
        let de = (gvv - 2.0 * l).abs() / l.abs().max(1.0);
        r_l = r_l.max(dl);
        r_g = r_g.max(dg);
        r_c = r_c.max(dc);
        r_e = r_e.max(de);
        grid.push(s as f64);
        res.push(dl.max(dg).max(dc).max(de));
    }
    let tol = 1e-8;
    let mut report = CheckReport::from_residuals("homogeneity", grid, res, tol)
        .value("L_scaling", r_l)
        .value("g_scaling", r_g)
        .value("cartan_euler", r_c)
        .value("euler_identity", r_e);
    if r_l > tol {
        report = report.note("Lagrangian is not positively 2-homogeneous");
    }
    if r_g > tol {
        report = report.note("fundamental tensor is not 0-homogeneous");
    }
    report
}

/// Like [`sample_admissible`] but only requires `check_vector`, so that
/// broken Lagrangians can still be sampled and reported on.
fn sample_admissible_loose<L: Lagrangian>(space: &ChartedSpace<L>, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let d = space.dim();
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if space.is_lorentzian() {
            let axis = space.time_orientation();
            let s: f64 = rng.gen_range(0.5..2.0);
            for (vi, ai) in v.iter_mut().zip(&axis) {
                *vi = *vi * 0.6 + s * ai;
            }
        }
        if space.check_vector(&x, &v).is_ok() {
            return (x, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::zoo::{self, Model};
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_and_minkowski_metrics() {
        let e = zoo::euclidean(3);
        let g = fundamental_tensor(&e, &[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(g.matrix, DMatrix::identity(3, 3));
        let m = zoo::minkowski(2);
        let g = fundamental_tensor(&m, &[0.0; 3], &[1.0, 0.3, -0.2]).unwrap();
        assert_eq!(g.matrix, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0])));
    }

    #[test]
    fn randers_fundamental_tensor_closed_form() {
        // F = |v| + b v^0, at v = e_0 (|v| = 1, F = 1 + b):
        // g_ij = (F/|v|)(δ_ij − v_i v_j/|v|²) + l_i l_j with l = ∂F/∂v = v/|v| + b e_0
        let b = 0.4;
        let s = zoo::randers(2, b).unwrap();
        let g = fundamental_tensor(&s, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let f = 1.0 + b;
        let l = [1.0 + b, 0.0];
        let proj = [[0.0, 0.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(g.matrix[(i, j)], f * proj[i][j] + l[i] * l[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cartan_vanishes_for_quadratic_and_contracts_for_randers() {
        let q = cartan_tensor(&zoo::sphere(3), &[0.2, 0.1, -0.3], &[1.0, 0.5, 0.2]).unwrap();
        assert!(q.iter().all(|c| c.abs() < 1e-12));
        let r = zoo::randers(3, 0.6).unwrap();
        let v = [0.3, -1.2, 0.7];
        let c = cartan_tensor(&r, &[0.0; 3], &v).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| c[(i * 3 + j) * 3 + k] * v[k]).sum();
                assert!(s.abs() < 1e-12);
                for k in 0..3 {
                    assert_relative_eq!(c[(i * 3 + j) * 3 + k], c[(j * 3 + k) * 3 + i], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn beem_cartan_is_nonzero_and_symmetric() {
        let b = zoo::beem(4).unwrap();
        let th = 0.9_f64;
        let v = [th.cos(), th.sin()];
        let c = cartan_tensor(&b, &[0.0, 0.0], &v).unwrap();
        assert!(c.iter().any(|x| x.abs() > 1e-3));
        let idx = |i: usize, j: usize, k: usize| c[(i * 2 + j) * 2 + k];
        for (i, j, k) in [(0, 0, 1), (0, 1, 1), (1, 0, 0)] {
            assert_relative_eq!(idx(i, j, k), idx(j, k, i), epsilon = 1e-10);
            assert_relative_eq!(idx(i, j, k), idx(k, i, j), epsilon = 1e-10);
        }
    }

    #[test]
    fn inner_products_and_norms() {
        let e = zoo::euclidean(2);
        let x = [0.0, 0.0];
        let g = fundamental_tensor(&e, &x, &[3.0, 4.0]).unwrap();
        let e1 = TangentVector::new(&x, &[1.0, 0.0]);
        let e2 = TangentVector::new(&x, &[0.0, 1.0]);
        assert_eq!(inner_product(&g, &e1, &e2).unwrap(), 0.0);
        let w = TangentVector::new(&x, &[3.0, 4.0]);
        assert_eq!(inner_product(&g, &w, &w).unwrap(), 25.0);
        let elsewhere = TangentVector::new(&[1.0, 0.0], &[1.0, 0.0]);
        assert!(matches!(inner_product(&g, &e1, &elsewhere), Err(Error::MismatchedBase)));
        assert_eq!(finsler_norm(&e, &x, &[3.0, 4.0]).unwrap(), 5.0);

        let m = zoo::minkowski(1);
        let g = fundamental_tensor(&m, &x, &[1.0, 0.0]).unwrap();
        let t = TangentVector::new(&x, &[1.0, 0.0]);
        assert_eq!(inner_product(&g, &t, &e2).unwrap(), 0.0);
        assert_eq!(inner_product(&g, &t, &t).unwrap(), -1.0);
        assert_relative_eq!(finsler_norm(&m, &x, &[2.0, 1.0]).unwrap(), 3f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(finsler_norm(&m, &x, &[1.0, 2.0]), Err(Error::WrongSign { .. })));

        let b = zoo::beem(4).unwrap();
        let (r, th) = (1.7, 0.7_f64);
        let f = finsler_norm(&b, &x, &[r * th.cos(), r * th.sin()]).unwrap();
        assert_relative_eq!(f, r * (-(4.0 * th).cos()).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn signature_mismatch_is_reported() {
        let wrong = ChartedSpace::new(
            "wrong",
            Model::Expression {
                dim: 2,
                signature: Signature::Lorentzian,
                lagrangian: Expr::parse("0.5*(v0^2 + v1^2) - 10").unwrap(),
                domain: None,
            },
        );
        assert!(matches!(fundamental_tensor(&wrong, &[0.0, 0.0], &[1.0, 0.0]), Err(Error::SignatureMismatch { .. })));
    }

    #[test]
    fn homogeneity_reports() {
        let r = validate_homogeneity(&zoo::euclidean(3), 100, 1);
        assert!(r.passed() && r.max_violation.0 <= 1e-10);
        let r = validate_homogeneity(&zoo::randers(3, 0.5).unwrap(), 100, 2);
        assert!(r.passed(), "{:?}", r.values);
        let broken = ChartedSpace::new(
            "broken",
            Model::Expression {
                dim: 2,
                signature: Signature::Positive,
                lagrangian: Expr::parse("v0^2 + v1^2 + 1").unwrap(),
                domain: None,
            },
        );
        let r = validate_homogeneity(&broken, 50, 3);
        assert!(!r.passed());
        assert!(r.get("L_scaling").unwrap() > 1e-3);
    }
}
