//! Small dense helpers that must run on any [`Real`] (Gaussian elimination,
//! determinants); everything at plain `f64` uses nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Solves `a y = b` for a row-major `n×n` matrix by partial pivoting.
pub fn solve<S: Real>(a: &[S], b: &[S]) -> Option<Vec<S>> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut y = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i * n + col].value().abs().partial_cmp(&m[j * n + col].value().abs()).unwrap()
        })?;
        if m[piv * n + col].value() == 0.0 || !m[piv * n + col].value().is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            y.swap(col, piv);
        }
        let inv = S::one() / m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] * inv;
            for k in col..n {
                let t = m[col * n + k];
                m[row * n + k] -= f * t;
            }
            let t = y[col];
            y[row] -= f * t;
        }
    }
    for row in (0..n).rev() {
        if m[row * n + row].value() == 0.0 {
            return None;
        }
        let mut acc = y[row];
        for k in row + 1..n {
            acc -= m[row * n + k] * y[k];
        }
        y[row] = acc / m[row * n + row];
    }
    Some(y)
}

/// Determinant of a row-major `n×n` matrix.
pub fn det<S: Real>(a: &[S], n: usize) -> S {
    let mut m = a.to_vec();
    let mut d = S::one();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].value().abs().partial_cmp(&m[j * n + col].value().abs()).unwrap())
            .unwrap();
        if m[piv * n + col].value() == 0.0 {
            return S::zero();
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            d = -d;
        }
        let p = m[col * n + col];
        d *= p;
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            for k in col..n {
                let t = m[col * n + k];
                m[row * n + k] -= f * t;
            }
        }
    }
    d
}

pub fn to_matrix(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let s = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Smallest singular value.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual;

    #[test]
    fn solve_and_det_match_nalgebra() {
        let a = [2.0, 1.0, 0.5, -1.0, 3.0, 0.2, 0.0, 0.7, -4.0];
        let b = [1.0, 2.0, 3.0];
        let y = solve(&a, &b).unwrap();
        let m = to_matrix(&a, 3);
        let y_ref = m.clone().lu().solve(&dvec(&b)).unwrap();
        for i in 0..3 {
            assert!((y[i] - y_ref[i]).abs() < 1e-14);
        }
        assert!((det(&a, 3) - m.determinant()).abs() < 1e-13);
    }

    #[test]
    fn det_derivative_is_jacobi_formula() {
        // d/ds det(A + sE) = det(A) tr(A^{-1}E)
        let a = [2.0, 1.0, -1.0, 3.0];
        let e = [0.3, -0.2, 0.5, 1.0];
        let m: Vec<Dual<f64>> = a.iter().zip(e).map(|(&x, d)| Dual::new(x, d)).collect();
        let d = det(&m, 2);
        let am = to_matrix(&a, 2);
        let expect = am.determinant() * (am.try_inverse().unwrap() * to_matrix(&e, 2)).trace();
        assert!((d.du - expect).abs() < 1e-13);
    }

    #[test]
    fn singular_system_is_reported() {
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]).is_none());
    }
}
