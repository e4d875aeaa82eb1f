//! Spacecraft attitude NMPC benchmark: dynamics, terminal weight and
//! transcription into a parameterized NLP.

mod dare;
mod dynamics;
mod transcription;

use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dare::{dare_residual, solve_dare, DareSolution};
pub use dynamics::{
    discrete_dynamics, dynamics_ct, kinematics_matrix, kinetic_energy, linearize_origin, rk4_step,
    RigidBody, PITCH_SINGULARITY_MARGIN_DEG,
};
pub use transcription::{build_nlp, OcpInstance, OcpLayout, SlackMode, VarKind};

pub const DARE_TOL: f64 = 1e-14;
pub const DARE_MAX_ITERS: usize = 100_000;

/// Time at which the benchmark reference returns to the origin.
pub const REFERENCE_SWITCH_TIME: f64 = 120.0;

/// Constraint set of the skew maneuver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Case {
    /// Input bounds only; state bounds are loose and never bind.
    One,
    /// Tight rate bounds and one-sided angle bounds.
    Two,
}

impl TryFrom<u8> for Case {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            _ => Err(Error::InvalidConfig(format!("case must be 1 or 2, got {v}"))),
        }
    }
}

impl From<Case> for u8 {
    fn from(c: Case) -> u8 {
        match c {
            Case::One => 1,
            Case::Two => 2,
        }
    }
}

impl Case {
    /// `(ξ_lb, ξ_ub)` in deg/s and deg.
    pub fn state_bounds_deg(self) -> (Vector6<f64>, Vector6<f64>) {
        match self {
            Case::One => (Vector6::repeat(-360.0), Vector6::repeat(360.0)),
            Case::Two => (
                -Vector6::new(1.15, 1.15, 1.15, 0.0, 0.0, 20.0),
                Vector6::new(1.15, 1.15, 1.15, 30.0, 30.0, 0.0),
            ),
        }
    }

    /// `(u_lb, u_ub)` in N·m.
    pub fn input_bounds(self) -> (Vector3<f64>, Vector3<f64>) {
        (Vector3::repeat(-2.0), Vector3::repeat(2.0))
    }
}

/// Reference `r(t)` in degrees: a skew maneuver held until 120 s, then the origin.
pub fn reference(t: f64) -> Vector6<f64> {
    if t < REFERENCE_SWITCH_TIME {
        Vector6::new(0.0, 0.0, 0.0, 15.0, 30.0, -20.0)
    } else {
        Vector6::zeros()
    }
}

/// Converts a state from (deg/s, deg) to (rad/s, rad).
pub fn state_to_si(xi_deg: &Vector6<f64>) -> Vector6<f64> {
    xi_deg.map(f64::to_radians)
}

/// Converts a state from (rad/s, rad) to (deg/s, deg).
pub fn state_to_deg(xi: &Vector6<f64>) -> Vector6<f64> {
    xi.map(f64::to_degrees)
}

/// Problem data for the attitude OCP. States are in SI units; bounds are
/// stored in SI as well and converted from degrees by [`SpacecraftParams::benchmark`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpacecraftParams {
    pub inertia: Matrix3<f64>,
    pub tau: f64,
    pub q: Matrix6<f64>,
    pub r: Matrix3<f64>,
    pub slack_weight: f64,
    pub terminal: Matrix6<f64>,
    pub horizon: usize,
    pub xi_lb: Vector6<f64>,
    pub xi_ub: Vector6<f64>,
    pub u_lb: Vector3<f64>,
    pub u_ub: Vector3<f64>,
    /// Multiplier applied to the state-bound rows, so that slacks are
    /// measured in the external (degree) units.
    pub state_row_scale: f64,
}

impl SpacecraftParams {
    /// Benchmark values with the terminal weight from the DARE of the
    /// linearization about the origin.
    pub fn benchmark(case: Case, horizon: usize) -> Result<Self> {
        let (lb, ub) = case.state_bounds_deg();
        let (u_lb, u_ub) = case.input_bounds();
        let q = Matrix6::from_diagonal(&Vector6::new(10.0, 10.0, 10.0, 1.0, 1.0, 1.0)) * 10.0;
        let mut params = Self {
            inertia: Matrix3::from_diagonal(&Vector3::new(918.0, 920.0, 1365.0)),
            tau: 3.0,
            q,
            r: Matrix3::identity() * 0.1,
            slack_weight: 10.0,
            terminal: q,
            horizon,
            xi_lb: state_to_si(&lb),
            xi_ub: state_to_si(&ub),
            u_lb,
            u_ub,
            state_row_scale: 180.0 / std::f64::consts::PI,
        };
        params.terminal = params.solve_terminal_weight()?.0;
        params.validate()?;
        Ok(params)
    }

    pub fn body(&self) -> Result<RigidBody> {
        RigidBody::new(self.inertia, self.tau)
    }

    /// Terminal weight from the DARE and its residual.
    pub fn solve_terminal_weight(&self) -> Result<(Matrix6<f64>, f64)> {
        let (a, b) = linearize_origin(&self.body()?);
        let sol = solve_dare(
            &DMatrix::from_column_slice(6, 6, a.as_slice()),
            &DMatrix::from_column_slice(6, 3, b.as_slice()),
            &DMatrix::from_column_slice(6, 6, self.q.as_slice()),
            &DMatrix::from_column_slice(3, 3, self.r.as_slice()),
            DARE_TOL,
            DARE_MAX_ITERS,
        )?;
        Ok((Matrix6::from_column_slice(sol.p.as_slice()), sol.residual))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.into()));
        let finite = self.inertia.iter().all(|v| v.is_finite())
            && self.q.iter().all(|v| v.is_finite())
            && self.r.iter().all(|v| v.is_finite())
            && self.terminal.iter().all(|v| v.is_finite())
            && self.slack_weight.is_finite()
            && self.state_row_scale.is_finite();
        if !finite {
            return bad("non-finite parameter");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("sampling period must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.slack_weight < 0.0 || !(self.state_row_scale > 0.0) {
            return bad("slack weight must be nonnegative and row scale positive");
        }
        let sym3 = |m: &Matrix3<f64>| (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
        let sym6 = |m: &Matrix6<f64>| (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
        if !sym3(&self.inertia) || !sym3(&self.r) || !sym6(&self.q) || !sym6(&self.terminal) {
            return bad("weights and inertia must be symmetric");
        }
        if self.inertia.cholesky().is_none() || self.r.cholesky().is_none() {
            return bad("inertia and input weight must be positive definite");
        }
        let psd = |m: &Matrix6<f64>| m.symmetric_eigenvalues().min() >= -1e-12 * (1.0 + m.amax());
        if !psd(&self.q) || !psd(&self.terminal) {
            return bad("state and terminal weights must be positive semidefinite");
        }
        let ordered = self.xi_lb.iter().zip(self.xi_ub.iter()).all(|(l, u)| l < u)
            && self.u_lb.iter().zip(self.u_ub.iter()).all(|(l, u)| l < u);
        if !ordered {
            return bad("lower bounds must be strictly below upper bounds");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_profile() {
        let skew = Vector6::new(0.0, 0.0, 0.0, 15.0, 30.0, -20.0);
        assert_eq!(reference(0.0), skew);
        assert_eq!(reference(60.0), skew);
        assert_eq!(reference(119.999), skew);
        assert_eq!(reference(120.0), Vector6::zeros());
        assert_eq!(reference(150.0), Vector6::zeros());
    }

    #[test]
    fn benchmark_terminal_weight() {
        let params = SpacecraftParams::benchmark(Case::One, 15).unwrap();
        let (p, residual) = params.solve_terminal_weight().unwrap();
        assert!(residual <= 1e-10 * (1.0 + p.norm()));
        assert!((p - p.transpose()).amax() == 0.0);
        assert!((p - params.q).symmetric_eigenvalues().min() >= -1e-9);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let good = SpacecraftParams::benchmark(Case::Two, 3).unwrap();
        let mut p = good.clone();
        p.horizon = 0;
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.tau = 0.0;
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.r[(0, 1)] = 0.5;
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.xi_lb[0] = p.xi_ub[0];
        assert!(p.validate().is_err());
        let mut p = good;
        p.q[(0, 0)] = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn case_serde() {
        assert_eq!(serde_json::from_str::<Case>("2").unwrap(), Case::Two);
        assert!(serde_json::from_str::<Case>("3").is_err());
        assert_eq!(serde_json::to_string(&Case::One).unwrap(), "1");
    }
}
