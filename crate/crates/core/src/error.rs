use thiserror::Error;

use crate::sspc::StepReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value produced by the {block} evaluation")]
    NonFinite { block: &'static str },

    #[error("matrix is numerically singular at pivot {index} (|pivot| = {magnitude:e})")]
    Singular { index: usize, magnitude: f64 },

    #[error("regularized diagonal block entry {index} = {value:e} is below the pivot threshold")]
    DegeneratePivot { index: usize, value: f64 },

    #[error("predictor failed at grid step {grid_step}: {source}")]
    PredictorFailed {
        grid_step: usize,
        #[source]
        source: Box<Error>,
        report: Box<StepReport>,
    },

    #[error("corrector failed at grid step {grid_step}: {source}")]
    CorrectorFailed {
        grid_step: usize,
        #[source]
        source: Box<Error>,
        report: Box<StepReport>,
    },

    #[error("corrector did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        report: Option<Box<StepReport>>,
    },

    #[error("Euler-angle kinematics are singular at pitch {pitch_deg} deg")]
    KinematicSingularity { pitch_deg: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    RiccatiNoConvergence { iterations: usize, residual: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("finite-difference check requested at a non-differentiable point (min |v_i + c_i| = {margin:e})")]
    NonDifferentiable { margin: f64 },

    #[error("active-set oracle found no feasible candidate")]
    Infeasible,

    #[error("active-set oracle found {count} distinct KKT candidates (degenerate instance)")]
    Degenerate { count: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("trace format error: {0}")]
    Format(String),
}

impl Error {
    /// Partial diagnostics attached to a failed `track` call, if any.
    pub fn step_report(&self) -> Option<&StepReport> {
        match self {
            Error::PredictorFailed { report, .. } | Error::CorrectorFailed { report, .. } => {
                Some(report)
            }
            Error::NoConvergence { report, .. } => report.as_deref(),
            _ => None,
        }
    }

    pub(crate) fn is_singular(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::DegeneratePivot { .. })
    }
}
