//! Dense linear solves for the predictor and corrector steps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::genjac::JacobianX;
use crate::nlp::check_len;

/// LU factors with row permutation, `P A = L U`, stored in place.
#[derive(Clone, Debug)]
pub struct LuFactors {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Gaussian elimination with partial pivoting.
    ///
    /// Fails when a pivot is exactly zero, or when any pivot magnitude falls
    /// below `pivot_threshold` times the largest pivot magnitude.
    pub fn factor(mut a: DMatrix<f64>, pivot_threshold: f64) -> Result<Self> {
        let n = a.nrows();
        check_len("matrix columns", n, a.ncols())?;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (offset, pmax) = a
                .view((k, k), (n - k, 1))
                .iter()
                .enumerate()
                .fold((0, -1.0), |best, (i, v)| {
                    if v.abs() > best.1 {
                        (i, v.abs())
                    } else {
                        best
                    }
                });
            if !(pmax > 0.0) {
                return Err(Error::Singular {
                    index: k,
                    magnitude: pmax.max(0.0),
                });
            }
            let piv = k + offset;
            if piv != k {
                a.swap_rows(k, piv);
                perm.swap(k, piv);
            }
            let inv = 1.0 / a[(k, k)];
            for i in k + 1..n {
                a[(i, k)] *= inv;
            }
            for j in k + 1..n {
                let akj = a[(k, j)];
                if akj == 0.0 {
                    continue;
                }
                // Column-major: the (k+1.., k) and (k+1.., j) segments are contiguous.
                let (left, mut right) = a.columns_range_pair_mut(k, j);
                let lcol = left.rows_range(k + 1..n);
                let mut rcol = right.rows_range_mut(k + 1..n);
                rcol.axpy(-akj, &lcol, 1.0);
            }
        }
        let largest = (0..n).map(|k| a[(k, k)].abs()).fold(0.0, f64::max);
        if let Some(k) = (0..n).find(|&k| a[(k, k)].abs() < pivot_threshold * largest) {
            return Err(Error::Singular {
                index: k,
                magnitude: a[(k, k)].abs(),
            });
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        check_len("right-hand side", n, b.len())?;
        let mut x = DVector::from_iterator(n, self.perm.iter().map(|&i| b[i]));
        // Forward substitution, unit lower triangle.
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..n {
                    x[i] -= self.lu[(i, k)] * xk;
                }
            }
        }
        // Back substitution.
        for k in (0..n).rev() {
            x[k] /= self.lu[(k, k)];
            let xk = x[k];
            if xk != 0.0 {
                for i in 0..k {
                    x[i] -= self.lu[(i, k)] * xk;
                }
            }
        }
        Ok(x)
    }
}

/// Solves `A x = b` by partial-pivoting LU.
pub fn linear_solve(a: &DMatrix<f64>, b: &DVector<f64>, pivot_threshold: f64) -> Result<DVector<f64>> {
    check_len("right-hand side", a.nrows(), b.len())?;
    LuFactors::factor(a.clone(), pivot_threshold)?.solve(b)
}

/// Solves `J Δ = rhs` by eliminating the multiplier block on the `D̂` pivot.
///
/// With `rhs = (r₁, r₂, r₃)`, `Δv = D̂⁻¹(r₃ + C∇c Δz)` and `(Δz, Δλ)` solve
///
/// ```text
///   [ H + ∇cᵀ D̂⁻¹ C ∇c   ∇gᵀ ] [Δz]   [ r₁ - ∇cᵀ D̂⁻¹ r₃ ]
///   [ ∇g                 0   ] [Δλ] = [ r₂              ]
/// ```
pub fn schur_reduced_solve(
    jac: &JacobianX,
    rhs: &DVector<f64>,
    pivot_threshold: f64,
) -> Result<DVector<f64>> {
    let (n, m, q) = jac.dims();
    check_len("right-hand side", n + m + q, rhs.len())?;
    if let Some(i) = (0..q).find(|&i| !(jac.d_hat[i] > pivot_threshold)) {
        return Err(Error::DegeneratePivot {
            index: i,
            value: jac.d_hat[i],
        });
    }
    let r1 = rhs.rows(0, n);
    let r2 = rhs.rows(n, m);
    let r3 = rhs.rows(n + m, q);

    let mut reduced = DMatrix::zeros(n + m, n + m);
    let mut hr = jac.hessian.clone();
    let mut rhs1 = r1.into_owned();
    for i in 0..q {
        let row = jac.jac_c.row(i);
        let inv_d = 1.0 / jac.d_hat[i];
        let w = jac.gamma.0[i] * inv_d;
        if w != 0.0 {
            // Rank-one update H += w ∇c_iᵀ ∇c_i.
            hr.ger(w, &row.transpose(), &row.transpose(), 1.0);
        }
        if r3[i] != 0.0 {
            rhs1.axpy(-r3[i] * inv_d, &row.transpose(), 1.0);
        }
    }
    reduced.view_mut((0, 0), (n, n)).copy_from(&hr);
    reduced.view_mut((0, n), (n, m)).copy_from(&jac.jac_g.transpose());
    reduced.view_mut((n, 0), (m, n)).copy_from(&jac.jac_g);
    let mut reduced_rhs = DVector::zeros(n + m);
    reduced_rhs.rows_mut(0, n).copy_from(&rhs1);
    reduced_rhs.rows_mut(n, m).copy_from(&r2);

    let sol = linear_solve(&reduced, &reduced_rhs, pivot_threshold)?;
    let dz = sol.rows(0, n);
    let cdz = &jac.jac_c * dz;
    let mut out = DVector::zeros(n + m + q);
    out.rows_mut(0, n + m).copy_from(&sol);
    for i in 0..q {
        out[n + m + i] = (r3[i] + jac.gamma.0[i] * cdz[i]) / jac.d_hat[i];
    }
    Ok(out)
}
