//! Geodesics `η̈ + 2G(η̇) = 0` and the exponential map.

use std::path::Path;

use crate::connection::spray;
use crate::error::{Error, Result};
use crate::lagrangian::{ChartedSpace, Lagrangian};
use crate::ode::{integrate, DenseSolution, OdeOptions};
use crate::report::write_csv;
use crate::tensor::finsler_norm;

/// Dense solution of the geodesic equation.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub t_grid: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub lagrangian_drift: f64,
    pub interp: DenseSolution,
    /// `L(η̇(0))`.
    pub energy: f64,
}

impl GeodesicPath {
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn t_end(&self) -> f64 {
        *self.t_grid.last().unwrap()
    }

    /// `(η(t), η̇(t))` by Hermite interpolation.
    pub fn at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let (y, _) = self.interp.eval(t);
        (y[..d].to_vec(), y[d..].to_vec())
    }

    pub fn write_csv<L: Lagrangian>(&self, space: &ChartedSpace<L>, path: &Path) -> Result<()> {
        let d = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.extend((0..d).map(|i| format!("v{i}")));
        header.push("L".into());
        let rows: Vec<Vec<f64>> = (0..self.t_grid.len())
            .map(|k| {
                let mut r = vec![self.t_grid[k]];
                r.extend(&self.points[k]);
                r.extend(&self.velocities[k]);
                r.push(space.lagrangian_at(&self.points[k], &self.velocities[k]));
                r
            })
            .collect();
        write_csv(path, &header, &rows)
    }
}

/// Default step cap: a few hundred steps over the horizon.
pub fn default_h_max(t_end: f64) -> f64 {
    (t_end / 400.0).clamp(0.005, 0.05)
}

/// Rescales `v` so that `F(v) = 1`.
pub fn unit_speed<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    space.check_vector(x, v)?;
    let f = finsler_norm(space, x, v)?;
    Ok(v.iter().map(|c| c / f).collect())
}

/// Integrates as far as possible; returns the partial path and the reason
/// for stopping early.
pub fn integrate_geodesic_partial<L: Lagrangian>(
    space: &ChartedSpace<L>,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<(GeodesicPath, Option<Error>)> {
    space.check_vector(x0, v0)?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidParam { param: "t_end".into(), message: format!("{t_end} must be positive") });
    }
    let d = space.dim();
    let lag = &space.lagrangian;
    let rhs = |_t: f64, y: &[f64]| -> Option<Vec<f64>> {
        let (x, v) = y.split_at(d);
        if !lag.in_domain(x) {
            return None;
        }
        let g = spray(lag, x, v)?;
        let mut out = v.to_vec();
        out.extend(g.iter().map(|c| -2.0 * c));
        Some(out)
    };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(v0);
    let opts = OdeOptions { rtol: tol, atol: tol * 1e-3, h_max: default_h_max(t_end), ..Default::default() };
    let run = integrate(rhs, 0.0, &y0, t_end, &opts);
    let sol = run.solution;
    let energy = space.lagrangian_at(x0, v0);
    let points: Vec<Vec<f64>> = sol.y.iter().map(|y| y[..d].to_vec()).collect();
    let velocities: Vec<Vec<f64>> = sol.y.iter().map(|y| y[d..].to_vec()).collect();
    let lagrangian_drift = points
        .iter()
        .zip(&velocities)
        .map(|(x, v)| (space.lagrangian_at(x, v) - energy).abs())
        .fold(0.0, f64::max);
    let path = GeodesicPath { t_grid: sol.t.clone(), points, velocities, lagrangian_drift, interp: sol, energy };
    Ok((path, run.stopped))
}

pub fn integrate_geodesic<L: Lagrangian>(space: &ChartedSpace<L>, x0: &[f64], v0: &[f64], t_end: f64, tol: f64) -> Result<GeodesicPath> {
    match integrate_geodesic_partial(space, x0, v0, t_end, tol)? {
        (path, None) => Ok(path),
        (_, Some(e)) => Err(e),
    }
}

/// `exp_x(v)`, the unit-time endpoint; `exp_x(0) = x`.
pub fn exponential_map<L: Lagrangian>(space: &ChartedSpace<L>, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().all(|c| *c == 0.0) {
        space.check_point(x)?;
        return Ok(x.to_vec());
    }
    let path = integrate_geodesic(space, x, v, 1.0, 1e-10)?;
    Ok(path.points.last().unwrap().clone())
}

/// Image under the stereographic chart of a point of the unit sphere in
/// `R^{n+1}` (used by oracles): `x_i = X_i / (1 − X_{n+1})`.
pub fn to_stereographic(p: &[f64]) -> Vec<f64> {
    let n = p.len() - 1;
    p[..n].iter().map(|c| c / (1.0 - p[n])).collect()
}

/// Inverse stereographic map `X_i = 2x_i/(1+|x|²)`, `X_{n+1} = (|x|²−1)/(|x|²+1)`.
pub fn from_stereographic(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let mut p: Vec<f64> = x.iter().map(|c| 2.0 * c / (1.0 + r2)).collect();
    p.push((r2 - 1.0) / (r2 + 1.0));
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{self, Warp};
    use std::f64::consts::PI;

    #[test]
    fn euclidean_lines() {
        let e = zoo::euclidean(3);
        let p = integrate_geodesic(&e, &[0.0; 3], &[1.0, 0.0, 0.0], 5.0, 1e-9).unwrap();
        for (t, x) in p.t_grid.iter().zip(&p.points) {
            assert!((x[0] - t).abs() < 1e-12 && x[1].abs() < 1e-15);
        }
        let end = exponential_map(&e, &[1.0, 2.0, 3.0], &[0.5, 0.0, -1.0]).unwrap();
        for (a, b) in end.iter().zip([1.5, 2.0, 2.0]) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(exponential_map(&e, &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sphere_geodesic_reaches_antipode() {
        let s = zoo::sphere(2);
        let x0 = [1.0, 0.0];
        let v0 = unit_speed(&s, &x0, &[0.0, 1.0]).unwrap();
        let p = integrate_geodesic(&s, &x0, &v0, PI, 1e-10).unwrap();
        let end = p.points.last().unwrap();
        // antipode of p in the chart is −p/|p|²
        assert!((end[0] + 1.0).abs() < 1e-4 && end[1].abs() < 1e-4, "{end:?}");
        assert!(p.lagrangian_drift < 1e-9);
    }

    #[test]
    fn sphere_exponential_quarter_circle() {
        // from the chart origin (south pole), a quarter great circle lands on the equator
        let s = zoo::sphere(2);
        let v = unit_speed(&s, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let q: Vec<f64> = v.iter().map(|c| c * PI / 2.0).collect();
        let end = exponential_map(&s, &[0.0, 0.0], &q).unwrap();
        let expect = to_stereographic(&[1.0, 0.0, 0.0]);
        assert!((end[0] - expect[0]).abs() < 1e-6 && end[1].abs() < 1e-6, "{end:?}");
    }

    #[test]
    fn flrw_time_lines_and_chart_exit() {
        let f = zoo::flrw(1, Warp::Cos);
        let p = integrate_geodesic(&f, &[0.0, 0.0], &[1.0, 0.0], 1.2, 1e-10).unwrap();
        for (t, x) in p.t_grid.iter().zip(&p.points) {
            assert!((x[0] - t).abs() < 1e-12 && x[1].abs() < 1e-15);
        }
        assert!(p.lagrangian_drift <= 1e-9);
        match integrate_geodesic(&f, &[0.0, 0.0], &[1.0, 0.0], 3.0, 1e-9) {
            Err(Error::ChartExit { t }) => assert!((t - PI / 2.0).abs() < 1e-3, "{t}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reparametrization_consistency() {
        let s = zoo::randers(2, 0.4).unwrap();
        let p = zoo::poincare_ball(2);
        for sp in [s, p] {
            let a = integrate_geodesic(&sp, &[0.1, 0.2], &[0.3, -0.2], 1.0, 1e-10).unwrap();
            let b = integrate_geodesic(&sp, &[0.1, 0.2], &[0.6, -0.4], 0.5, 1e-10).unwrap();
            let (ea, eb) = (a.points.last().unwrap(), b.points.last().unwrap());
            assert!((ea[0] - eb[0]).abs() < 1e-9 && (ea[1] - eb[1]).abs() < 1e-9);
        }
    }
}
