//! Small reference problems with closed-form solutions.

use nalgebra::{DMatrix, DVector};

use crate::nlp::{Dims, ParameterizedNlp, PrimalDual};

/// `f ≡ 0`, `g ≡ 0` (m rows), no inequalities.
#[derive(Clone, Copy, Debug)]
pub struct ZeroProblem {
    pub n: usize,
    pub m: usize,
    pub l: usize,
}

impl ParameterizedNlp for ZeroProblem {
    fn dims(&self) -> Dims {
        Dims {
            n: self.n,
            m: self.m,
            q: 0,
            l: self.l,
        }
    }
    fn f(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> f64 {
        0.0
    }
    fn grad_f(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.n)
    }
    fn g(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.m)
    }
    fn jac_g(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.m, self.n)
    }
    fn c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn jac_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, self.n)
    }
    fn hess_lagrangian(
        &self,
        _z: &DVector<f64>,
        _lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.n)
    }
    fn jac_pz_lagrangian(
        &self,
        _z: &DVector<f64>,
        _lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.l)
    }
    fn jac_p_g(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.m, self.l)
    }
    fn jac_p_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, self.l)
    }
}

/// Projection of `p ∈ R²` onto the unit circle:
///
/// ```text
///     min ½‖z - p‖²   s.t.   ½(‖z‖² - 1) = 0,   z₁ - 5 <= 0
/// ```
///
/// For `p ≠ 0` the solution is `z = p/‖p‖`, `λ = ‖p‖ - 1`, `v = 0`, smooth
/// and nonlinear in `p`, with the inequality strictly inactive.
#[derive(Clone, Copy, Debug, Default)]
pub struct CircleProjection;

impl CircleProjection {
    pub fn solution(&self, p: &DVector<f64>) -> PrimalDual {
        let r = p.norm();
        PrimalDual::new(p / r, DVector::from_element(1, r - 1.0), DVector::zeros(1))
    }
}

impl ParameterizedNlp for CircleProjection {
    fn dims(&self) -> Dims {
        Dims {
            n: 2,
            m: 1,
            q: 1,
            l: 2,
        }
    }
    fn f(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * (z - p).norm_squared()
    }
    fn grad_f(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        z - p
    }
    fn g(&self, z: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 0.5 * (z.norm_squared() - 1.0))
    }
    fn jac_g(&self, z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &[z[0], z[1]])
    }
    fn c(&self, z: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, z[0] - 5.0)
    }
    fn jac_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
    }
    fn hess_lagrangian(
        &self,
        _z: &DVector<f64>,
        lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        DMatrix::identity(2, 2) * (1.0 + lambda[0])
    }
    fn jac_pz_lagrangian(
        &self,
        _z: &DVector<f64>,
        _lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        -DMatrix::identity(2, 2)
    }
    fn jac_p_g(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 2)
    }
    fn jac_p_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 2)
    }
}
