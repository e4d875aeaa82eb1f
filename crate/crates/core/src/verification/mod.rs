//! Independent checks: constraint qualifications, finite-difference
//! Jacobian checks, convergence-rate probes and QP ground truth.

pub mod cases;
pub mod problems;
pub mod qp;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd;
use crate::genjac::{gamma_at, jac_p, jac_x};
use crate::nlp::{kkt_residual, ParameterizedNlp, PrimalDual};
use crate::parallel::Execution;
use crate::sspc::{corrector_step, predictor, SolverConfig};

/// Default activity tolerance for the constraint-qualification checks.
pub const ACTIVITY_TOL: f64 = 1e-8;

fn stack_rows(blocks: &[&DMatrix<f64>], rows: &[Vec<usize>], n: usize) -> DMatrix<f64> {
    let total: usize = rows.iter().map(Vec::len).sum();
    let mut out = DMatrix::zeros(total, n);
    let mut k = 0;
    for (b, idx) in blocks.iter().zip(rows) {
        for &i in idx {
            out.set_row(k, &b.row(i));
            k += 1;
        }
    }
    out
}

/// Linear independence of `∇g` and the rows of `∇c` with `|c_i| <= tol`.
///
/// Full rank means the smallest singular value of the stack exceeds `tol`
/// times the largest.
pub fn licq_check<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    x.check_dims(nlp.dims())?;
    let n = nlp.dims().n;
    let jg = nlp.jac_g(&x.z, p);
    let jc = nlp.jac_c(&x.z, p);
    let c = nlp.c(&x.z, p);
    let active: Vec<usize> = (0..c.len()).filter(|&i| c[i].abs() <= tol).collect();
    let stack = stack_rows(&[&jg, &jc], &[(0..jg.nrows()).collect(), active], n);
    if stack.nrows() == 0 {
        return Ok(true);
    }
    if stack.nrows() > n {
        return Ok(false);
    }
    let sv = stack.singular_values();
    Ok(sv.min() > tol * sv.max())
}

/// Orthonormal basis of the null space of `a` (columns), with singular
/// values at or below `tol` times the largest counted as zero.
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let mut square = DMatrix::zeros(a.nrows().max(n), n);
    square.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = square.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| !(svd.singular_values[i] > tol * smax) || smax == 0.0)
        .collect();
    let mut z = DMatrix::zeros(n, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        z.set_column(k, &vt.row(i).transpose());
    }
    z
}

/// Strong second-order sufficiency, checked on the null space of `∇g` and
/// the strongly active rows of `∇c` (`v_i > tol`).
///
/// Under strict complementarity this equals the cone condition; otherwise
/// it is a sufficient surrogate (the subspace is larger than the cone's span
/// only when weakly active constraints exist, in which case it may reject
/// instances that satisfy the cone condition).
pub fn ssosc_check<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    x.check_dims(nlp.dims())?;
    let n = nlp.dims().n;
    let jg = nlp.jac_g(&x.z, p);
    let jc = nlp.jac_c(&x.z, p);
    let strong: Vec<usize> = (0..x.v.len()).filter(|&i| x.v[i] > tol).collect();
    let stack = stack_rows(&[&jg, &jc], &[(0..jg.nrows()).collect(), strong], n);
    let z = null_space(&stack, tol);
    if z.ncols() == 0 {
        return Ok(true);
    }
    let h = nlp.hess_lagrangian(&x.z, &x.lambda, &x.v, p);
    let h = (&h + h.transpose()) * 0.5;
    let reduced = z.transpose() * h * &z;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    Ok(reduced.symmetric_eigenvalues().min() > tol)
}

/// Which Jacobian [`fd_jacobian_check`] compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrt {
    X,
    P,
}

/// `min_i |v_i + c_i|`, the distance of the NCP arguments from the kink
/// `-c_i = v_i` (`+inf` without inequalities).
pub fn kink_margin<P: ParameterizedNlp + ?Sized>(nlp: &P, x: &PrimalDual, p: &DVector<f64>) -> f64 {
    let c = nlp.c(&x.z, p);
    c.iter()
        .zip(x.v.iter())
        .map(|(ci, vi)| (vi + ci).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Largest entrywise relative error `|fd - an| / max(|fd|, |an|)` over
/// entries where either magnitude exceeds `floor`.
pub fn max_relative_error(fd: &DMatrix<f64>, an: &DMatrix<f64>, floor: f64) -> f64 {
    fd.iter()
        .zip(an.iter())
        .filter(|(a, b)| a.abs().max(b.abs()) > floor)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
        .fold(0.0, f64::max)
}

/// Largest initial step per coordinate that keeps every NCP pair on its
/// side of the kink to first order, capped at `1e-2 (1 + |x_k|)`.
fn kink_safe_steps(sens: &DMatrix<f64>, at: &DVector<f64>, margin: f64) -> Vec<f64> {
    (0..at.len())
        .map(|k| {
            let cap = 1e-2 * (1.0 + at[k].abs());
            let s = sens.column(k).amax();
            if s > 0.0 {
                cap.min(0.5 * margin / s)
            } else {
                cap
            }
        })
        .collect()
}

/// Compares `∂ₓF` (with `δ = 0`) or `∂ₚF` against extrapolated central
/// differences of the KKT residual; returns the largest relative error over
/// entries with magnitude above `1e-8`.
///
/// Each column starts from the largest kink-safe step and halves down to
/// `step`, so the estimate is limited neither by truncation nor by the
/// round-off of small entries in rows with large terms.
pub fn fd_jacobian_check<P: ParameterizedNlp + Sync + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    step: f64,
    wrt: Wrt,
) -> Result<f64> {
    let dims = nlp.dims();
    let margin = kink_margin(nlp, x, p);
    if !(margin > 10.0 * step) {
        return Err(Error::NonDifferentiable { margin });
    }
    // Residual evaluation errors cannot be raised from inside the map, so
    // they surface as NaN columns and are caught below.
    let residual = |x: &PrimalDual, p: &DVector<f64>| {
        kkt_residual(nlp, x, p)
            .map(|r| r.to_vector())
            .unwrap_or_else(|_| DVector::from_element(dims.total(), f64::NAN))
    };
    kkt_residual(nlp, x, p)?;
    let gamma = gamma_at(nlp, x, p)?;
    let (fd, an) = match wrt {
        Wrt::X => {
            let xv = x.to_vector();
            // Sensitivity of v + c to (z, λ, v).
            let mut sens = DMatrix::zeros(dims.q, dims.total());
            sens.view_mut((0, 0), (dims.q, dims.n)).copy_from(&nlp.jac_c(&x.z, p));
            sens.view_mut((0, dims.n + dims.m), (dims.q, dims.q))
                .fill_diagonal(1.0);
            let initial = kink_safe_steps(&sens, &xv, margin);
            let fd = fd::jacobian_extrapolated(
                |y| residual(&PrimalDual::from_vector(dims, y).expect("length preserved"), p),
                &xv,
                &initial,
                step,
                Execution::default(),
            );
            (fd, jac_x(nlp, x, p, &gamma, 0.0)?.to_dense())
        }
        Wrt::P => {
            let initial = kink_safe_steps(&nlp.jac_p_c(&x.z, p), p, margin);
            let fd = fd::jacobian_extrapolated(|q| residual(x, q), p, &initial, step, Execution::default());
            (fd, jac_p(nlp, x, p, &gamma)?.0)
        }
    };
    if fd.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            block: "finite-difference residual",
        });
    }
    Ok(max_relative_error(&fd, &an, 1e-8))
}

/// Outcome of a convergence-rate probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeOutcome {
    /// Fitted slope of `log e₊` against `log e`.
    Order(f64),
    /// Every perturbed start was corrected to round-off in one step.
    ExactInOne,
    /// The reference point sits on (or too near) a kink of the residual.
    NonDifferentiable { margin: f64 },
    /// Too few error pairs above the round-off floor to fit a slope.
    Inconclusive { usable_pairs: usize },
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Deterministic unit direction with entries of alternating sign and
/// varying size.
fn probe_direction(len: usize) -> DVector<f64> {
    let d = DVector::from_fn(len, |i, _| {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        s * (1.0 + 0.37 * (i % 5) as f64)
    });
    let norm = d.norm();
    d / norm
}

/// Runs one unregularized corrector step from `x* + r d` for radii
/// `r = radius·2^{-j}` and fits the slope of `log e₊` against `log e` over
/// pairs whose post-step error is above the round-off floor.
pub fn convergence_order_probe<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x_star: &PrimalDual,
    p: &DVector<f64>,
    radius: f64,
) -> Result<ProbeOutcome> {
    let margin = kink_margin(nlp, x_star, p);
    if !(margin > 10.0 * radius) {
        return Ok(ProbeOutcome::NonDifferentiable { margin });
    }
    let cfg = SolverConfig::default();
    let star = x_star.to_vector();
    let floor = 1e-12 * (1.0 + star.norm());
    let dir = probe_direction(star.len());
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in 0..12 {
        let r = radius * 0.5f64.powi(j);
        let start = x_star.offset(&(&dir * r));
        let (next, _, _) = corrector_step(nlp, &start, p, 0.0, &cfg)?;
        let e1 = (next.to_vector() - &star).norm();
        if e1 > floor {
            xs.push(r.ln());
            ys.push(e1.ln());
        }
    }
    if xs.is_empty() {
        return Ok(ProbeOutcome::ExactInOne);
    }
    if xs.len() < 3 {
        return Ok(ProbeOutcome::Inconclusive {
            usable_pairs: xs.len(),
        });
    }
    Ok(ProbeOutcome::Order(fit_slope(&xs, &ys)))
}

/// Observed order of the predictor error in `‖Δp‖`.
///
/// From the exact solution at `p0`, predicts to `p0 + Δp/2^j` and measures
/// the distance to `solution(p0 + Δp/2^j)`; returns the fitted slope of
/// `log error` against `log ‖Δp‖`.
pub fn predictor_order<P, S>(
    nlp: &P,
    solution: S,
    p0: &DVector<f64>,
    dp: &DVector<f64>,
    halvings: usize,
) -> Result<f64>
where
    P: ParameterizedNlp + ?Sized,
    S: Fn(&DVector<f64>) -> PrimalDual,
{
    let cfg = SolverConfig::default();
    let x0 = solution(p0);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in 0..halvings {
        let step = dp * 0.5f64.powi(j as i32);
        let pred = predictor(nlp, &x0, p0, &step, 0.0, &cfg)?;
        let exact = solution(&(p0 + &step));
        let err = (pred.x.to_vector() - exact.to_vector()).norm();
        xs.push(step.norm().ln());
        ys.push(err.ln());
    }
    Ok(fit_slope(&xs, &ys))
}
