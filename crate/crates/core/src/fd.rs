//! Central finite differences.
//!
//! Steps are rounded to powers of two and the actual perturbation
//! `fl(x ± h) - x` is used as the divisor, so differences of affine maps with
//! dyadic data are exact.

use nalgebra::{DMatrix, DVector};

use crate::nlp::{ParameterizedNlp, PrimalDual};
use crate::parallel::{map_indexed, Execution};

/// Default relative step, `h_k ≈ 1e-6 (1 + |x_k|)`.
pub const DEFAULT_STEP: f64 = 1e-6;

fn pow2_step(step: f64, xk: f64) -> f64 {
    let h = step * (1.0 + xk.abs());
    2f64.powi(h.log2().round() as i32)
}

/// Central-difference Jacobian of `f` at `x`, one column per coordinate.
pub fn jacobian<F>(f: F, x: &DVector<f64>, step: f64, exec: Execution) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    let cols = map_indexed(exec, x.len(), |k| {
        let h = pow2_step(step, x[k]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let width = (xp[k] - x[k]) + (x[k] - xm[k]);
        (f(&xp) - f(&xm)) / width
    });
    let rows = cols.first().map_or_else(|| f(x).len(), |c| c.len());
    let mut out = DMatrix::zeros(rows, x.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

/// Largest power of two not above `h`.
fn pow2_floor(h: f64) -> f64 {
    2f64.powi(h.log2().floor() as i32)
}

/// Levels of the extrapolation tableau.
const TABLEAU: usize = 10;

/// Ridders-extrapolated central differences, entry by entry.
///
/// Column `k` starts from the power of two below `initial[k]` and halves the
/// step down to `min_step (1 + |x_k|)`. Each entry keeps the tableau value
/// with the smallest error estimate and stops updating once the tableau
/// diverges.
pub fn jacobian_extrapolated<F>(
    f: F,
    x: &DVector<f64>,
    initial: &[f64],
    min_step: f64,
    exec: Execution,
) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    let central = |k: usize, h: f64| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let width = (xp[k] - x[k]) + (x[k] - xm[k]);
        (f(&xp) - f(&xm)) / width
    };
    let cols = map_indexed(exec, x.len(), |k| {
        let floor = min_step * (1.0 + x[k].abs());
        let mut h = pow2_floor(initial[k].max(floor));
        let mut prev: Vec<DVector<f64>> = vec![central(k, h)];
        let rows = prev[0].len();
        let mut best = prev[0].clone();
        let mut err = DVector::from_element(rows, f64::INFINITY);
        let mut done = vec![false; rows];
        for _ in 1..TABLEAU {
            if h * 0.5 < floor {
                break;
            }
            h *= 0.5;
            let mut cur = vec![central(k, h)];
            let mut fac = 4.0;
            for j in 1..=prev.len() {
                let next = (&cur[j - 1] * fac - &prev[j - 1]) / (fac - 1.0);
                for r in 0..rows {
                    if done[r] {
                        continue;
                    }
                    let e = (next[r] - cur[j - 1][r]).abs().max((next[r] - prev[j - 1][r]).abs());
                    if e <= err[r] {
                        err[r] = e;
                        best[r] = next[r];
                    }
                }
                cur.push(next);
                fac *= 4.0;
            }
            let last = prev.len();
            for r in 0..rows {
                if !done[r] && (cur[last][r] - prev[last - 1][r]).abs() >= 2.0 * err[r] {
                    done[r] = true;
                }
            }
            prev = cur;
            if done.iter().all(|&d| d) {
                break;
            }
        }
        best
    });
    let rows = cols.first().map_or_else(|| f(x).len(), |c| c.len());
    let mut out = DMatrix::zeros(rows, x.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

/// Central-difference gradient of a scalar function.
pub fn gradient<F>(f: F, x: &DVector<f64>, step: f64, exec: Execution) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
{
    jacobian(|y| DVector::from_element(1, f(y)), x, step, exec)
        .row(0)
        .transpose()
}

/// `∇_z L(z, λ, v, p) = ∇f + ∇gᵀλ + ∇cᵀv`.
pub fn lagrangian_gradient<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
    v: &DVector<f64>,
    p: &DVector<f64>,
) -> DVector<f64> {
    nlp.grad_f(z, p) + nlp.jac_g(z, p).tr_mul(lambda) + nlp.jac_c(z, p).tr_mul(v)
}

/// Symmetrized finite-difference Hessian of the Lagrangian in `z`.
pub fn hessian_lagrangian<P: ParameterizedNlp + Sync + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    step: f64,
    exec: Execution,
) -> DMatrix<f64> {
    let h = jacobian(
        |z| lagrangian_gradient(nlp, z, &x.lambda, &x.v, p),
        &x.z,
        step,
        exec,
    );
    (&h + h.transpose()) * 0.5
}

/// Wraps an NLP and replaces its Hessian callback by finite differences of
/// the analytic Lagrangian gradient.
#[derive(Clone, Debug)]
pub struct FdHessian<P> {
    pub inner: P,
    pub step: f64,
    pub exec: Execution,
}

impl<P> FdHessian<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            step: DEFAULT_STEP,
            exec: Execution::default(),
        }
    }
}

impl<P: ParameterizedNlp + Sync> ParameterizedNlp for FdHessian<P> {
    fn dims(&self) -> crate::nlp::Dims {
        self.inner.dims()
    }
    fn f(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.inner.f(z, p)
    }
    fn grad_f(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        self.inner.grad_f(z, p)
    }
    fn g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        self.inner.g(z, p)
    }
    fn jac_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.inner.jac_g(z, p)
    }
    fn c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        self.inner.c(z, p)
    }
    fn jac_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.inner.jac_c(z, p)
    }
    fn hess_lagrangian(
        &self,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
        v: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        let x = PrimalDual::new(z.clone(), lambda.clone(), v.clone());
        hessian_lagrangian(&self.inner, &x, p, self.step, self.exec)
    }
    fn jac_pz_lagrangian(
        &self,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
        v: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.inner.jac_pz_lagrangian(z, lambda, v, p)
    }
    fn jac_p_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.inner.jac_p_g(z, p)
    }
    fn jac_p_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.inner.jac_p_c(z, p)
    }
}
