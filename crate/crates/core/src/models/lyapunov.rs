//! Quadratic Lyapunov functions `V(x) = x^T B x` from `A^T B + B A = -I`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovQuadratic {
    b: DMatrix<f64>,
    min_eigenvalue: f64,
    residual: f64,
}

impl LyapunovQuadratic {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Smallest eigenvalue of `B`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `||A^T B + B A + I||_inf` (max row sum).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&(&self.b * &v))
    }

    /// `grad V = 2 B x`.
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        2.0 * &self.b * DVector::from_column_slice(x)
    }

    /// `D^2 V = 2 B`.
    pub fn hessian(&self) -> DMatrix<f64> {
        2.0 * &self.b
    }
}

pub(crate) fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solves `A^T B + B A = -I` for symmetric positive-definite `B`.
///
/// The `r(r+1)/2` upper-triangular unknowns are assembled into one dense
/// linear system, solved by LU, then symmetrized and refined once.
pub fn solve_lyapunov(a: &DMatrix<f64>) -> Result<LyapunovQuadratic> {
    let r = a.nrows();
    if r == 0 || a.ncols() != r {
        return Err(Error::InvalidInput("Lyapunov solve needs a nonempty square matrix".into()));
    }
    let abscissa = spectral_abscissa(a);
    if !(abscissa < 0.0) {
        return Err(Error::UnstableMatrix { abscissa });
    }

    let idx = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row-major position in the upper triangle
        i * r + j - i - i * i.saturating_sub(1) / 2
    };
    let n = r * (r + 1) / 2;
    let mut sys = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    // (A^T B + B A)_{ij} = sum_k a_{ki} B_{kj} + B_{ik} a_{kj}
    for i in 0..r {
        for j in i..r {
            let row = idx(i, j);
            for k in 0..r {
                sys[(row, idx(k, j))] += a[(k, i)];
                sys[(row, idx(i, k))] += a[(k, j)];
            }
            rhs[row] = if i == j { -1.0 } else { 0.0 };
        }
    }
    let lu = sys.clone().lu();
    let mut sol = lu.solve(&rhs).ok_or(Error::Singular("Lyapunov system"))?;
    // one step of iterative refinement
    let res = &rhs - &sys * &sol;
    if let Some(corr) = lu.solve(&res) {
        sol += corr;
    }

    let mut b = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            b[(i, j)] = sol[idx(i, j)];
        }
    }
    let b = (&b + b.transpose()) * 0.5;
    let residual = inf_norm(&(a.transpose() * &b + &b * a + DMatrix::identity(r, r)));
    let min_eigenvalue = b.clone().symmetric_eigenvalues().min();
    if !(min_eigenvalue > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Lyapunov solution is not positive definite (min eigenvalue {min_eigenvalue:e})"
        )));
    }
    Ok(LyapunovQuadratic { b, min_eigenvalue, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_equation() {
        let q = solve_lyapunov(&DMatrix::from_element(1, 1, -2.5)).unwrap();
        assert!((q.matrix()[(0, 0)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn griffith_linear_part_unit_rates() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
        let q = solve_lyapunov(&a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.5]);
        assert!((q.matrix() - expected).abs().max() < 1e-14);
        assert!(q.residual() <= LYAPUNOV_RESIDUAL_TOL);
        assert!((q.value(&[1.0, 0.0]) - 0.75).abs() < 1e-14);
        assert!((q.gradient(&[0.0, 1.0])[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_unstable_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, -1.0]);
        assert!(matches!(solve_lyapunov(&a), Err(Error::UnstableMatrix { .. })));
        assert!(solve_lyapunov(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn triangular_index_covers_all_unknowns() {
        // r = 4: ten unknowns, the dense solve would be singular otherwise
        let a = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                -1.0 - i as f64
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let q = solve_lyapunov(&a).unwrap();
        assert!(q.residual() <= LYAPUNOV_RESIDUAL_TOL);
    }

    proptest! {
        #[test]
        fn residual_and_definiteness_on_bidiagonal(alphas in prop::collection::vec(0.2f64..3.0, 1..6)) {
            let r = alphas.len();
            let a = DMatrix::from_fn(r, r, |i, j| if i == j { -alphas[i] } else if i == j + 1 { 1.0 } else { 0.0 });
            let q = solve_lyapunov(&a).unwrap();
            prop_assert!(q.residual() <= LYAPUNOV_RESIDUAL_TOL, "residual {}", q.residual());
            prop_assert!(q.min_eigenvalue() > 0.0);
            prop_assert_eq!(q.matrix(), &q.matrix().transpose());
        }
    }
}
