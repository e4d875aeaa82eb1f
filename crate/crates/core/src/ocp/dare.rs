//! Discrete algebraic Riccati equation by fixed-point iteration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub iterations: usize,
    /// Frobenius norm of the DARE residual at `p`.
    pub residual: f64,
}

fn riccati_map(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let at_p = a.transpose() * p;
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    let k = s
        .cholesky()
        .ok_or_else(|| Error::InvalidParams("R + BᵀPB is not positive definite".into()))?
        .solve(&(&bt_p * a));
    let next = q + &at_p * a - (&at_p * b) * k;
    Ok((&next + next.transpose()) * 0.5)
}

/// Residual `‖AᵀPA - P - AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q‖_F`.
pub fn dare_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    Ok((riccati_map(a, b, q, r, p)? - p).norm())
}

/// Iterates `P ← Q + AᵀPA - AᵀPB(R + BᵀPB)⁻¹BᵀPA` from `P₀ = Q` until the
/// Frobenius change drops below `tol` (relative to `1 + ‖P‖`).
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<DareSolution> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) || b.nrows() != n || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::InvalidParams("inconsistent DARE dimensions".into()));
    }
    let mut p = q.clone();
    for it in 1..=max_iters {
        let next = riccati_map(a, b, q, r, &p)?;
        let change = (&next - &p).norm();
        p = next;
        if !change.is_finite() {
            break;
        }
        if change <= tol * (1.0 + p.norm()) {
            let residual = dare_residual(a, b, q, r, &p)?;
            return Ok(DareSolution { p, iterations: it, residual });
        }
    }
    let residual = dare_residual(a, b, q, r, &p).unwrap_or(f64::NAN);
    Err(Error::RiccatiNoConvergence {
        iterations: max_iters,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn scalar_closed_form() {
        // p = 1 + p - p²/(1 + p)  =>  p² - p - 1 = 0.
        let one = dmatrix![1.0];
        let sol = solve_dare(&one, &one, &one, &one, 1e-12, 10_000).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.p[(0, 0)] - golden).abs() < 1e-9);
        assert!(sol.residual < 1e-9);
    }

    #[test]
    fn scalar_without_input() {
        // p = 1 + p/4  =>  p = 4/3.
        let sol = solve_dare(&dmatrix![0.5], &dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0], 1e-12, 10_000).unwrap();
        assert!((sol.p[(0, 0)] - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_dynamics_give_state_weight() {
        let q = dmatrix![2.0, 0.5; 0.5, 1.0];
        let sol = solve_dare(&DMatrix::zeros(2, 2), &dmatrix![1.0; 0.0], &q, &dmatrix![1.0], 1e-12, 100).unwrap();
        assert_eq!(sol.p, q);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn iterates_increase_from_state_weight() {
        let a = dmatrix![1.0, 0.5; 0.0, 1.0];
        let b = dmatrix![0.0; 1.0];
        let q = DMatrix::identity(2, 2);
        let r = dmatrix![0.1];
        let mut p = q.clone();
        for _ in 0..50 {
            let next = riccati_map(&a, &b, &q, &r, &p).unwrap();
            assert!((&next - &p).symmetric_eigenvalues().min() >= -1e-12 * (1.0 + next.norm()));
            p = next;
        }
    }

    #[test]
    fn unstabilizable_pair_fails() {
        let a = dmatrix![2.0];
        let b = dmatrix![0.0];
        let q = dmatrix![1.0];
        let r = dmatrix![1.0];
        let err = solve_dare(&a, &b, &q, &r, 1e-10, 200).unwrap_err();
        assert!(matches!(err, Error::RiccatiNoConvergence { .. }));
    }
}
