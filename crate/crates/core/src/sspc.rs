//! Semismooth Euler-Newton predictor-corrector tracking.
//!
//! [`track`] moves an approximate primal-dual solution from `p_prev` to
//! `p_next` along the straight homotopy path `P(t) = p_prev + tΔp`, split
//! into `M = max(1, ceil(‖Δp‖/κ))` uniform steps. Each step takes one Euler
//! predictor step using an element of `∂ₚF`, then runs semismooth Newton
//! corrector iterations at the new grid point until `‖F‖ <= ε`.
//!
//! Every linear system uses the regularized `D̂ = D + δI`. The regularization
//! follows `δ <- min(δ, ‖F‖)` before each solve; a singular factorization
//! multiplies `δ` by ten and retries, up to `max_retries` times per solve.

use log::{debug, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genjac::{gamma_at, jac_p, jac_x, JacobianX};
use crate::linsolve::{linear_solve, schur_reduced_solve};
use crate::nlp::{check_len, kkt_residual, ParameterizedNlp, PrimalDual};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial regularization `δ₀`.
    pub delta0: f64,
    /// KKT residual tolerance `ε`.
    pub eps: f64,
    /// Largest parameter change per grid step, `κ`.
    pub kappa: f64,
    /// Corrector iteration budget per grid step.
    pub max_corrector_iters: usize,
    /// Relative pivot size below which a factorization counts as singular.
    pub pivot_threshold: f64,
    /// δ escalations allowed per linear solve.
    pub max_retries: usize,
    /// Eliminate the multiplier block on the `D̂` pivot before factoring.
    pub use_schur: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta0: 1e-8,
            eps: 1e-5,
            kappa: 0.5,
            max_corrector_iters: 50,
            pivot_threshold: 1e-14,
            max_retries: 5,
            use_schur: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.delta0 >= 0.0 && self.delta0.is_finite()) {
            return bad(format!("delta0 must be finite and >= 0, got {}", self.delta0));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be > 0, got {}", self.eps));
        }
        if !(self.kappa > 0.0) {
            return bad(format!("kappa must be > 0, got {}", self.kappa));
        }
        if self.max_corrector_iters < 1 {
            return bad("max_corrector_iters must be >= 1".into());
        }
        if !(self.pivot_threshold > 0.0) {
            return bad(format!(
                "pivot_threshold must be > 0, got {}",
                self.pivot_threshold
            ));
        }
        Ok(())
    }
}

/// Diagnostics for one [`track`] call.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Number of homotopy grid steps `M`.
    pub grid_steps: usize,
    pub corrector_iters_per_step: Vec<usize>,
    pub final_residual: f64,
    /// δ used by every successful factorization, in order.
    pub delta_history: Vec<f64>,
    /// Singularity-driven δ escalations.
    pub retries: usize,
    pub converged: bool,
}

impl StepReport {
    /// Uniform homotopy step `h = 1/M`.
    pub fn step_size(&self) -> f64 {
        1.0 / self.grid_steps as f64
    }

    pub fn total_corrector_iters(&self) -> usize {
        self.corrector_iters_per_step.iter().sum()
    }

    /// Last δ used, or `None` when no linear system was solved.
    pub fn final_delta(&self) -> Option<f64> {
        self.delta_history.last().copied()
    }
}

/// `M = max(1, ceil(‖Δp‖/κ))`.
///
/// Ratios within a few ulps of an integer are snapped to it, so that
/// `‖Δp‖ = jκ` computed in floating point yields `M = j`.
pub fn grid_size(dp_norm: f64, kappa: f64) -> usize {
    let ratio = dp_norm / kappa;
    let nearest = ratio.round();
    let steps = if (ratio - nearest).abs() <= 4.0 * f64::EPSILON * ratio.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    (steps as usize).max(1)
}

/// The `M + 1` grid parameters `P(i/M)`, each computed directly from `i`;
/// the last point is `p_next` itself.
pub fn homotopy_grid(p_prev: &DVector<f64>, p_next: &DVector<f64>, kappa: f64) -> Vec<DVector<f64>> {
    let dp = p_next - p_prev;
    let m = grid_size(dp.norm(), kappa);
    (0..=m).map(|i| grid_point(p_prev, p_next, &dp, i, m)).collect()
}

fn grid_point(
    p_prev: &DVector<f64>,
    p_next: &DVector<f64>,
    dp: &DVector<f64>,
    i: usize,
    m: usize,
) -> DVector<f64> {
    if i == 0 {
        p_prev.clone()
    } else if i == m {
        p_next.clone()
    } else {
        p_prev + dp * (i as f64 / m as f64)
    }
}

/// Next δ after a singular factorization. The min-updates can drive δ far
/// below `δ₀`, so the first escalation restarts from `δ₀`.
fn escalate(delta: f64, cfg: &SolverConfig) -> f64 {
    (delta * 10.0).max(cfg.delta0).max(1e-12)
}

fn solve_with(jac: &JacobianX, rhs: &DVector<f64>, cfg: &SolverConfig) -> Result<DVector<f64>> {
    if cfg.use_schur {
        schur_reduced_solve(jac, rhs, cfg.pivot_threshold)
    } else {
        linear_solve(&jac.to_dense(), rhs, cfg.pivot_threshold)
    }
}

/// Outcome of one regularized solve `Ĵ s = rhs`.
struct Solved {
    step: DVector<f64>,
    delta: f64,
    retries: usize,
}

fn regularized_solve<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    gamma: &crate::genjac::GammaVector,
    rhs: &DVector<f64>,
    mut delta: f64,
    cfg: &SolverConfig,
) -> Result<Solved> {
    let mut retries = 0;
    loop {
        let jac = jac_x(nlp, x, p, gamma, delta)?;
        match solve_with(&jac, rhs, cfg) {
            Ok(step) => {
                return Ok(Solved {
                    step,
                    delta,
                    retries,
                })
            }
            Err(e) if e.is_singular() && retries < cfg.max_retries => {
                let next = escalate(delta, cfg);
                warn!("singular iteration matrix ({e}); raising delta {delta:e} -> {next:e}");
                delta = next;
                retries += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Result of a predictor step.
#[derive(Clone, Debug)]
pub struct Predicted {
    pub x: PrimalDual,
    /// δ actually used (after any escalation); `None` if no solve was needed.
    pub delta: Option<f64>,
    pub retries: usize,
}

/// Euler predictor `x⁻ = x - B̂⁻¹[V·Δp_step + F(x, p)]`.
///
/// `dp_step` is the already scaled increment `hΔp`.
pub fn predictor<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    dp_step: &DVector<f64>,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<Predicted> {
    check_len("parameter step", nlp.dims().l, dp_step.len())?;
    let res = kkt_residual(nlp, x, p)?;
    let gamma = gamma_at(nlp, x, p)?;
    let v = jac_p(nlp, x, p, &gamma)?;
    let rhs = &v.0 * dp_step + res.to_vector();
    if rhs.iter().all(|&r| r == 0.0) {
        return Ok(Predicted {
            x: x.clone(),
            delta: None,
            retries: 0,
        });
    }
    let solved = regularized_solve(nlp, x, p, &gamma, &rhs, delta, cfg)?;
    Ok(Predicted {
        x: x.offset(&-solved.step),
        delta: Some(solved.delta),
        retries: solved.retries,
    })
}

/// One semismooth Newton step `x <- x - Ê⁻¹F(x, p)` with `Ê` regularized by
/// `delta`. Returns the new iterate and the δ actually used.
pub fn corrector_step<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<(PrimalDual, f64, usize)> {
    let res = kkt_residual(nlp, x, p)?;
    let gamma = gamma_at(nlp, x, p)?;
    let solved = regularized_solve(nlp, x, p, &gamma, &res.to_vector(), delta, cfg)?;
    Ok((x.offset(&-solved.step), solved.delta, solved.retries))
}

/// Result of a corrector loop.
#[derive(Clone, Debug)]
pub struct Corrected {
    pub x: PrimalDual,
    pub iterations: usize,
    pub residual: f64,
    /// δ after the loop's min-updates and escalations.
    pub delta: f64,
    pub delta_history: Vec<f64>,
    pub retries: usize,
}

/// Newton corrector loop at fixed `p_plus`, refreshing `γ`, `Ê` and
/// `δ <- min(δ, ‖F‖)` every pass until `‖F‖ <= ε`.
///
/// Errors with [`Error::NoConvergence`] when `max_corrector_iters` passes do
/// not reach the tolerance.
pub fn corrector<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x_minus: &PrimalDual,
    p_plus: &DVector<f64>,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<Corrected> {
    let mut out = Corrected {
        x: x_minus.clone(),
        iterations: 0,
        residual: f64::INFINITY,
        delta,
        delta_history: Vec::new(),
        retries: 0,
    };
    corrector_into(nlp, p_plus, cfg, &mut out)?;
    Ok(out)
}

fn corrector_into<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    p_plus: &DVector<f64>,
    cfg: &SolverConfig,
    state: &mut Corrected,
) -> Result<()> {
    loop {
        let res = kkt_residual(nlp, &state.x, p_plus)?;
        state.residual = res.norm;
        if res.norm <= cfg.eps {
            return Ok(());
        }
        if state.iterations >= cfg.max_corrector_iters {
            return Err(Error::NoConvergence {
                iterations: state.iterations,
                residual: res.norm,
                report: None,
            });
        }
        state.delta = state.delta.min(res.norm);
        let gamma = gamma_at(nlp, &state.x, p_plus)?;
        let solved = regularized_solve(
            nlp,
            &state.x,
            p_plus,
            &gamma,
            &res.to_vector(),
            state.delta,
            cfg,
        )?;
        state.delta = solved.delta;
        state.retries += solved.retries;
        state.delta_history.push(solved.delta);
        state.x = state.x.offset(&-solved.step);
        state.iterations += 1;
        debug!(
            "corrector iter {}: residual {:e}, delta {:e}",
            state.iterations, res.norm, solved.delta
        );
    }
}

/// Tracks a solution from `p_prev` to `p_next`.
///
/// `x_prev` should approximately solve the problem at `p_prev`; this is only
/// checked through convergence at `p_next`. When a grid step has a zero
/// parameter increment and the current point already meets `ε`, the
/// predictor is skipped, so a converged point is returned unchanged.
pub fn track<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x_prev: &PrimalDual,
    p_prev: &DVector<f64>,
    p_next: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(PrimalDual, StepReport)> {
    let dims = nlp.dims();
    check_len("p_prev", dims.l, p_prev.len())?;
    check_len("p_next", dims.l, p_next.len())?;
    x_prev.check_dims(dims)?;
    cfg.validate()?;

    let dp = p_next - p_prev;
    let m = grid_size(dp.norm(), cfg.kappa);
    let h = 1.0 / m as f64;
    let dp_step = &dp * h;
    let step_is_zero = dp_step.iter().all(|&d| d == 0.0);

    let mut report = StepReport {
        grid_steps: m,
        ..StepReport::default()
    };
    let mut x = x_prev.clone();
    let mut delta = cfg.delta0;

    for i in 1..=m {
        let p = grid_point(p_prev, p_next, &dp, i - 1, m);
        let p_plus = grid_point(p_prev, p_next, &dp, i, m);

        let fnorm = kkt_residual(nlp, &x, &p)
            .map_err(|e| predictor_failure(i, e, &report))?
            .norm;
        delta = delta.min(fnorm);
        if !(step_is_zero && fnorm <= cfg.eps) {
            let pred = predictor(nlp, &x, &p, &dp_step, delta, cfg)
                .map_err(|e| predictor_failure(i, e, &report))?;
            if let Some(d) = pred.delta {
                delta = d;
                report.delta_history.push(d);
            }
            report.retries += pred.retries;
            x = pred.x;
        }

        let mut state = Corrected {
            x,
            iterations: 0,
            residual: f64::INFINITY,
            delta,
            delta_history: Vec::new(),
            retries: 0,
        };
        let outcome = corrector_into(nlp, &p_plus, cfg, &mut state);
        report.corrector_iters_per_step.push(state.iterations);
        report.delta_history.extend_from_slice(&state.delta_history);
        report.retries += state.retries;
        report.final_residual = state.residual;
        if let Err(e) = outcome {
            return Err(match e {
                Error::NoConvergence {
                    iterations,
                    residual,
                    ..
                } => Error::NoConvergence {
                    iterations,
                    residual,
                    report: Some(Box::new(report)),
                },
                other => Error::CorrectorFailed {
                    grid_step: i,
                    source: Box::new(other),
                    report: Box::new(report),
                },
            });
        }
        x = state.x;
        delta = state.delta;
    }
    report.converged = true;
    Ok((x, report))
}

fn predictor_failure(grid_step: usize, e: Error, report: &StepReport) -> Error {
    Error::PredictorFailed {
        grid_step,
        source: Box::new(e),
        report: Box::new(report.clone()),
    }
}
