//! Parameterized nonlinear programs and their semismooth KKT residual.
//!
//! A problem has the form
//!
//! ```text
//!     min_z  f(z, p)   s.t.   g(z, p) = 0,   c(z, p) <= 0
//! ```
//!
//! with Lagrangian `L = f + g'λ + c'v`. The KKT conditions are rewritten as
//! the square nonsmooth system `F(x, p) = 0` for `x = (z, λ, v)`, where the
//! complementarity rows use the min NCP function `ψ(-c_i, v_i)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Problem dimensions: primal `n`, equalities `m`, inequalities `q`,
/// parameters `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub l: usize,
}

impl Dims {
    /// Length of the primal-dual vector, `n + m + q`.
    pub fn total(&self) -> usize {
        self.n + self.m + self.q
    }
}

/// Evaluation callbacks for a parameterized NLP.
///
/// All derivatives are supplied analytically. Implementations must be
/// reentrant; the batch routines call them from several threads.
pub trait ParameterizedNlp {
    fn dims(&self) -> Dims;

    fn f(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64;
    fn grad_f(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;

    fn g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;
    /// `m x n`
    fn jac_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;

    fn c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;
    /// `q x n`
    fn jac_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;

    /// `∇²_z L`, `n x n`.
    fn hess_lagrangian(
        &self,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
        v: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DMatrix<f64>;

    /// `∇_p (∇_z L)`, `n x l`.
    fn jac_pz_lagrangian(
        &self,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
        v: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DMatrix<f64>;

    /// `m x l`
    fn jac_p_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;
    /// `q x l`
    fn jac_p_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;
}

impl<T: ParameterizedNlp + ?Sized> ParameterizedNlp for &T {
    fn dims(&self) -> Dims {
        (**self).dims()
    }
    fn f(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
        (**self).f(z, p)
    }
    fn grad_f(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        (**self).grad_f(z, p)
    }
    fn g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        (**self).g(z, p)
    }
    fn jac_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        (**self).jac_g(z, p)
    }
    fn c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        (**self).c(z, p)
    }
    fn jac_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        (**self).jac_c(z, p)
    }
    fn hess_lagrangian(
        &self,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
        v: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        (**self).hess_lagrangian(z, lambda, v, p)
    }
    fn jac_pz_lagrangian(
        &self,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
        v: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        (**self).jac_pz_lagrangian(z, lambda, v, p)
    }
    fn jac_p_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        (**self).jac_p_g(z, p)
    }
    fn jac_p_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        (**self).jac_p_c(z, p)
    }
}

/// Primal-dual tuple `x = (z, λ, v)`.
///
/// No sign restriction is placed on `v`; nonnegativity only holds at KKT
/// points.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDual {
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub v: DVector<f64>,
}

impl PrimalDual {
    pub fn new(z: DVector<f64>, lambda: DVector<f64>, v: DVector<f64>) -> Self {
        Self { z, lambda, v }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            z: DVector::zeros(dims.n),
            lambda: DVector::zeros(dims.m),
            v: DVector::zeros(dims.q),
        }
    }

    pub fn len(&self) -> usize {
        self.z.len() + self.lambda.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacked `(z, λ, v)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let (n, m) = (self.z.len(), self.lambda.len());
        let mut out = DVector::zeros(self.len());
        out.rows_mut(0, n).copy_from(&self.z);
        out.rows_mut(n, m).copy_from(&self.lambda);
        out.rows_mut(n + m, self.v.len()).copy_from(&self.v);
        out
    }

    pub fn from_vector(dims: Dims, x: &DVector<f64>) -> Result<Self> {
        check_len("primal-dual vector", dims.total(), x.len())?;
        Ok(Self {
            z: x.rows(0, dims.n).into_owned(),
            lambda: x.rows(dims.n, dims.m).into_owned(),
            v: x.rows(dims.n + dims.m, dims.q).into_owned(),
        })
    }

    /// `self + step` in the stacked coordinates.
    pub fn offset(&self, step: &DVector<f64>) -> Self {
        let (n, m, q) = (self.z.len(), self.lambda.len(), self.v.len());
        Self {
            z: &self.z + step.rows(0, n),
            lambda: &self.lambda + step.rows(n, m),
            v: &self.v + step.rows(n + m, q),
        }
    }

    pub fn check_dims(&self, dims: Dims) -> Result<()> {
        check_len("z", dims.n, self.z.len())?;
        check_len("lambda", dims.m, self.lambda.len())?;
        check_len("v", dims.q, self.v.len())
    }

    pub fn is_finite(&self) -> bool {
        all_finite(self.z.iter()) && all_finite(self.lambda.iter()) && all_finite(self.v.iter())
    }
}

/// The three blocks of `F(x, p)` and the Euclidean norm of their stack.
#[derive(Clone, Debug, PartialEq)]
pub struct KktResidual {
    pub stationarity: DVector<f64>,
    pub feas_eq: DVector<f64>,
    pub complementarity: DVector<f64>,
    pub norm: f64,
}

impl KktResidual {
    pub fn to_vector(&self) -> DVector<f64> {
        let (n, m, q) = (
            self.stationarity.len(),
            self.feas_eq.len(),
            self.complementarity.len(),
        );
        let mut out = DVector::zeros(n + m + q);
        out.rows_mut(0, n).copy_from(&self.stationarity);
        out.rows_mut(n, m).copy_from(&self.feas_eq);
        out.rows_mut(n + m, q).copy_from(&self.complementarity);
        out
    }
}

/// The min NCP function: zero exactly when `a >= 0`, `b >= 0`, `ab = 0`.
#[inline]
pub fn ncp_min(a: f64, b: f64) -> f64 {
    a.min(b)
}

/// Evaluates `F(x, p)`.
pub fn kkt_residual<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
) -> Result<KktResidual> {
    let dims = nlp.dims();
    x.check_dims(dims)?;
    check_len("parameter", dims.l, p.len())?;

    let grad = finite_vec("grad_f", nlp.grad_f(&x.z, p))?;
    let jg = finite_mat("jac_g", nlp.jac_g(&x.z, p))?;
    let jc = finite_mat("jac_c", nlp.jac_c(&x.z, p))?;
    let g = finite_vec("g", nlp.g(&x.z, p))?;
    let c = finite_vec("c", nlp.c(&x.z, p))?;
    check_len("g", dims.m, g.len())?;
    check_len("c", dims.q, c.len())?;
    check_shape("jac_g", (dims.m, dims.n), jg.shape())?;
    check_shape("jac_c", (dims.q, dims.n), jc.shape())?;

    let stationarity = grad + jg.tr_mul(&x.lambda) + jc.tr_mul(&x.v);
    let complementarity = DVector::from_iterator(
        dims.q,
        c.iter().zip(x.v.iter()).map(|(ci, vi)| ncp_min(-ci, *vi)),
    );
    let norm = (stationarity.norm_squared() + g.norm_squared() + complementarity.norm_squared())
        .sqrt();
    Ok(KktResidual {
        stationarity,
        feas_eq: g,
        complementarity,
        norm,
    })
}

/// Norm of `F(x, p)`.
pub fn residual_norm<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
) -> Result<f64> {
    kkt_residual(nlp, x, p).map(|r| r.norm)
}

/// Checks the KKT conditions at tolerance `tol`: small residual, `v >= -tol`
/// and `c(z, p) <= tol`.
pub fn is_kkt_point<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    let res = kkt_residual(nlp, x, p)?;
    if res.norm > tol {
        return Ok(false);
    }
    if x.v.iter().any(|&vi| vi < -tol) {
        return Ok(false);
    }
    let c = nlp.c(&x.z, p);
    Ok(c.iter().all(|&ci| ci <= tol))
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn check_shape(
    what: &'static str,
    expected: (usize, usize),
    got: (usize, usize),
) -> Result<()> {
    check_len(what, expected.0, got.0)?;
    check_len(what, expected.1, got.1)
}

fn all_finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> bool {
    it.all(|v| v.is_finite())
}

pub(crate) fn finite_vec(block: &'static str, v: DVector<f64>) -> Result<DVector<f64>> {
    if all_finite(v.iter()) {
        Ok(v)
    } else {
        Err(Error::NonFinite { block })
    }
}

pub(crate) fn finite_mat(block: &'static str, m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if all_finite(m.iter()) {
        Ok(m)
    } else {
        Err(Error::NonFinite { block })
    }
}
