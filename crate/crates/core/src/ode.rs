//! Dormand–Prince 5(4) with cubic Hermite dense output.

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, h_max: 0.05, h_init: 1e-3, max_steps: 1_000_000 }
    }
}

/// Accepted steps with states and derivatives at every knot.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
}

impl DenseSolution {
    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("non-empty solution")
    }

    fn interval(&self, t: f64) -> usize {
        match self.t.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.t.len().saturating_sub(2)),
            Err(i) => i.saturating_sub(1).min(self.t.len().saturating_sub(2)),
        }
    }

    /// State and derivative at `t` (clamped to the solved range).
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        if self.t.len() == 1 {
            return (self.y[0].clone(), self.f[0].clone());
        }
        let t = t.clamp(self.t[0], self.t_end());
        let i = self.interval(t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            2.0 * s * s * s - 3.0 * s * s + 1.0,
            s * s * s - 2.0 * s * s + s,
            -2.0 * s * s * s + 3.0 * s * s,
            s * s * s - s * s,
        );
        let (d00, d10, d01, d11) = (
            (6.0 * s * s - 6.0 * s) / h,
            3.0 * s * s - 4.0 * s + 1.0,
            (-6.0 * s * s + 6.0 * s) / h,
            3.0 * s * s - 2.0 * s,
        );
        let (y0, y1, f0, f1) = (&self.y[i], &self.y[i + 1], &self.f[i], &self.f[i + 1]);
        let y = (0..y0.len()).map(|k| h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k]).collect();
        let dy = (0..y0.len()).map(|k| d00 * y0[k] + d10 * f0[k] + d01 * y1[k] + d11 * f1[k]).collect();
        (y, dy)
    }
}

/// Result of an integration: the solution up to where it got, and the
/// reason it stopped early, if any.
#[derive(Debug)]
pub struct Integration {
    pub solution: DenseSolution,
    pub stopped: Option<Error>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are the differences to
// the embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y′ = f(t, y)` from `t0` to `t_end`. `f` returns `None` when
/// the state leaves the admissible domain; the integrator then shrinks the
/// step and reports a chart exit once the step cannot shrink further.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Integration
where
    F: FnMut(f64, &[f64]) -> Option<Vec<f64>>,
{
    let n = y0.len();
    let Some(f0) = f(t0, y0) else {
        return Integration {
            solution: DenseSolution { t: vec![t0], y: vec![y0.to_vec()], f: vec![vec![0.0; n]] },
            stopped: Some(Error::ChartExit { t: t0 }),
        };
    };
    let mut sol = DenseSolution { t: vec![t0], y: vec![y0.to_vec()], f: vec![f0.clone()] };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k0 = f0;
    let mut h = opts.h_init.min(opts.h_max).min(t_end - t0);
    let mut steps = 0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Integration { solution: sol, stopped: Some(Error::Numerical(format!("step limit reached at t = {t}"))) };
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        k[0].clone_from(&k0);
        let mut outside = false;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                stage[i] = acc;
            }
            match f(t + C[s] * h, &stage) {
                Some(v) => k[s] = v,
                None => {
                    outside = true;
                    break;
                }
            }
        }
        let floor = 1e-10 * t.abs().max(1.0);
        if outside {
            if h < floor {
                return Integration { solution: sol, stopped: Some(Error::ChartExit { t }) };
            }
            h *= 0.25;
            continue;
        }
        // stage 6 evaluates at the fifth-order solution (FSAL)
        let y_new = stage.clone();
        let mut err = 0.0;
        for i in 0..n {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            if h < 1e-14 * t.abs().max(1.0) {
                return Integration { solution: sol, stopped: Some(Error::StepUnderflow { t, h }) };
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k0 = k[6].clone();
            sol.t.push(t);
            sol.y.push(y.clone());
            sol.f.push(k0.clone());
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.h_max);
        if h < 1e-14 * t.abs().max(1.0) && t < t_end {
            return Integration { solution: sol, stopped: Some(Error::StepUnderflow { t, h }) };
        }
    }
    Integration { solution: sol, stopped: None }
}
