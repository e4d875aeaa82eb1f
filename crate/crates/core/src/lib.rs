//! Semismooth predictor-corrector tracking of parameterized nonlinear
//! programs, with a spacecraft attitude NMPC benchmark.

pub mod error;
pub mod fd;
pub mod genjac;
pub mod harness;
pub mod linsolve;
pub mod nlp;
pub mod ocp;
pub mod parallel;
pub mod sspc;
pub mod verification;

pub use error::{Error, Result};
pub use genjac::{gamma_select, jac_p, jac_x, GammaVector, JacobianP, JacobianX};
pub use linsolve::{linear_solve, schur_reduced_solve};
pub use nlp::{kkt_residual, Dims, KktResidual, ParameterizedNlp, PrimalDual};
pub use parallel::Execution;
pub use sspc::{corrector, grid_size, predictor, track, SolverConfig, StepReport};
