//! Closed-loop NMPC simulation of the attitude benchmark.

mod trace;

use std::path::PathBuf;
use std::time::Instant;

use log::{debug, info};
use nalgebra::{DVector, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlp::{kkt_residual, ParameterizedNlp, PrimalDual};
use crate::ocp::{
    build_nlp, discrete_dynamics, reference, rk4_step, state_to_deg, state_to_si, Case, OcpInstance,
    SlackMode, SpacecraftParams,
};
use crate::parallel::{map_slice, Execution};
use crate::sspc::{track, SolverConfig};

pub use trace::{read_trace, write_trace, TraceFormat, TraceRecord, CSV_HEADER};

/// Plant model used to advance the simulated spacecraft.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// The prediction model itself (no plant-model mismatch).
    #[default]
    Euler,
    /// RK4 with ten substeps per sampling period.
    Rk4,
}

pub const RK4_SUBSTEPS: usize = 10;

/// Reference signal fed to the controller.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceProfile {
    /// Skew maneuver until 120 s, then back to the origin.
    #[default]
    Benchmark,
    /// Always the origin.
    Origin,
}

impl ReferenceProfile {
    /// Reference in degrees at time `t`.
    pub fn at(self, t: f64) -> Vector6<f64> {
        match self {
            ReferenceProfile::Benchmark => reference(t),
            ReferenceProfile::Origin => Vector6::zeros(),
        }
    }
}

/// How the first solve is initialized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColdStart {
    /// Newton from a zero-control rollout at the first parameter.
    Rollout,
    /// Track from the equilibrium problem with `r = ξ(0)`, whose solution is
    /// known exactly, to the first parameter.
    #[default]
    Homotopy,
}

/// Simulation settings. Every field has a default, so a JSON file may set
/// any subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub case: Case,
    pub horizon: usize,
    /// Simulated time in seconds, a multiple of the sampling period.
    pub duration: f64,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
    pub format: TraceFormat,
    pub integrator: Integrator,
    pub reference: ReferenceProfile,
    pub slack_mode: SlackMode,
    /// Seed for the measurement perturbation.
    pub seed: u64,
    /// Standard deviation of additive measurement noise (deg/s, deg); zero disables it.
    pub measurement_noise: f64,
    /// Solves per sampling instant used to average the timing.
    pub repeats: usize,
    pub cold_start: ColdStart,
    /// Initial slack value of the rollout cold start.
    pub cold_start_slack: f64,
    /// Corrector budget multiplier for the first solve.
    pub cold_start_budget: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            case: Case::One,
            horizon: 15,
            duration: 240.0,
            solver: SolverConfig::default(),
            out: None,
            format: TraceFormat::Csv,
            integrator: Integrator::Euler,
            reference: ReferenceProfile::Benchmark,
            slack_mode: SlackMode::Scalar,
            seed: 0,
            measurement_noise: 0.0,
            repeats: 1,
            cold_start: ColdStart::Homotopy,
            cold_start_slack: 1e-3,
            cold_start_budget: 4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, tau: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.solver.validate()?;
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        let steps = self.duration / tau;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!(
                "duration {} s is not a multiple of the sampling period {tau} s",
                self.duration
            ));
        }
        if self.repeats == 0 || self.cold_start_budget == 0 {
            return bad("repeats and cold_start_budget must be at least 1".into());
        }
        if !(self.measurement_noise >= 0.0 && self.measurement_noise.is_finite()) {
            return bad("measurement_noise must be finite and >= 0".into());
        }
        if !(self.cold_start_slack >= 0.0) {
            return bad("cold_start_slack must be >= 0".into());
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SpacecraftParams> {
        SpacecraftParams::benchmark(self.case, self.horizon)
    }

    pub fn steps(&self, tau: f64) -> usize {
        (self.duration / tau).round() as usize
    }
}

/// A simulation that stopped early; `trace` holds every completed instant.
#[derive(Debug, thiserror::Error)]
#[error("simulation aborted at step {step} (t = {t} s): {source}")]
pub struct SimFailure {
    pub step: usize,
    pub t: f64,
    #[source]
    pub source: Error,
    pub trace: Vec<TraceRecord>,
}

/// Zero-control rollout with small positive slacks, zero equality
/// multipliers and the slack-sign multipliers at the slack weight.
///
/// With `v = 0` on the rows `-s <= 0` every slack would be inactive with a
/// linear cost, leaving its column of `∂ₓF` identically zero.
pub fn cold_start(ocp: &OcpInstance, xi_si: &Vector6<f64>, slack: f64) -> PrimalDual {
    let d = ocp.dims();
    let z = ocp.rollout(xi_si, &[], slack);
    let mut v = DVector::zeros(d.q);
    for j in 1..=ocp.horizon() {
        for r in ocp.layout.slack_rows(j) {
            v[r] = ocp.params.slack_weight;
        }
    }
    PrimalDual::new(z, DVector::zeros(d.m), v)
}

/// Advances the plant by one sampling period.
pub fn advance_plant(
    integrator: Integrator,
    xi_si: &Vector6<f64>,
    u: &Vector3<f64>,
    ocp: &OcpInstance,
) -> Result<Vector6<f64>> {
    let body = ocp.body();
    match integrator {
        Integrator::Euler => discrete_dynamics(xi_si, u, body),
        Integrator::Rk4 => rk4_step(xi_si, u, body, body.tau, RK4_SUBSTEPS),
    }
}

/// Runs the closed loop from `ξ(0) = 0`.
pub fn run_closed_loop(cfg: &SimConfig) -> std::result::Result<Vec<TraceRecord>, SimFailure> {
    let fail = |step: usize, t: f64, source: Error, trace: Vec<TraceRecord>| SimFailure {
        step,
        t,
        source,
        trace,
    };
    let setup = || -> Result<OcpInstance> {
        let params = cfg.params()?;
        cfg.validate(params.tau)?;
        build_nlp(&params, cfg.slack_mode)
    };
    let ocp = setup().map_err(|e| fail(0, 0.0, e, Vec::new()))?;
    let tau = ocp.params.tau;
    let steps = cfg.steps(tau);

    let noise = Normal::new(0.0, cfg.measurement_noise).expect("validated standard deviation");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut measure = |xi: &Vector6<f64>| -> Vector6<f64> {
        if cfg.measurement_noise > 0.0 {
            xi + state_to_si(&Vector6::from_fn(|_, _| noise.sample(&mut rng)))
        } else {
            *xi
        }
    };

    let mut trace = Vec::with_capacity(steps);
    let mut xi = Vector6::zeros();
    let mut x_prev: Option<PrimalDual> = None;
    let mut p_prev: Option<DVector<f64>> = None;

    for k in 0..steps {
        let t = k as f64 * tau;
        let measured = measure(&xi);
        let p = OcpInstance::parameter(&measured, &state_to_si(&cfg.reference.at(t)));
        let (x_start, p_start, solver) = match (&x_prev, &p_prev) {
            (Some(x), Some(pp)) => (x.clone(), pp.clone(), cfg.solver.clone()),
            _ => {
                let mut s = cfg.solver.clone();
                s.max_corrector_iters *= cfg.cold_start_budget;
                match cfg.cold_start {
                    ColdStart::Rollout => (cold_start(&ocp, &measured, cfg.cold_start_slack), p.clone(), s),
                    ColdStart::Homotopy => {
                        let p0 = OcpInstance::parameter(&measured, &measured);
                        (cold_start(&ocp, &measured, 0.0), p0, s)
                    }
                }
            }
        };

        let mut outcome = None;
        let mut elapsed = 0.0;
        for _ in 0..cfg.repeats {
            let start = Instant::now();
            let res = track(&ocp, &x_start, &p_start, &p, &solver);
            elapsed += start.elapsed().as_secs_f64();
            outcome = Some(res);
        }
        let (x, report) = match outcome.expect("at least one repeat") {
            Ok(v) => v,
            Err(e) => return Err(fail(k, t, e, trace)),
        };
        let residual = match kkt_residual(&ocp, &x, &p) {
            Ok(r) => r.norm,
            Err(e) => return Err(fail(k, t, e, trace)),
        };
        let u = ocp.stage_input(&x.z, 0);

        let mut rec = TraceRecord {
            t,
            kkt_res: residual,
            grid_steps: report.grid_steps,
            corr_iters: report.total_corrector_iters(),
            solve_ms: elapsed * 1e3 / cfg.repeats as f64,
            delta_final: report.final_delta().unwrap_or(solver.delta0),
            ..TraceRecord::default()
        };
        rec.set_xi_deg(&state_to_deg(&xi));
        rec.set_u(&u);
        debug!(
            "t = {t:>6.1} s  |F| = {residual:.3e}  M = {}  iters = {}",
            rec.grid_steps, rec.corr_iters
        );
        trace.push(rec);

        xi = match advance_plant(cfg.integrator, &xi, &u, &ocp) {
            Ok(v) => v,
            Err(e) => return Err(fail(k, t, e, trace)),
        };
        x_prev = Some(x);
        p_prev = Some(p);
    }
    info!("closed loop finished: {} steps", trace.len());
    Ok(trace)
}

/// Runs independent simulations, scheduled by `exec`.
pub fn run_many(
    configs: &[SimConfig],
    exec: Execution,
) -> Vec<std::result::Result<Vec<TraceRecord>, SimFailure>> {
    map_slice(exec, configs, run_closed_loop)
}
