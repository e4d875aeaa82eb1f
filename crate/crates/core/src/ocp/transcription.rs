//! Multiple-shooting transcription of the slack-penalized attitude OCP.
//!
//! Decision vector `z = (u_0..u_{N-1}, ξ_1..ξ_N, s_1..s_N)`; parameter
//! `p = (ξ_current, r)` in SI units. Inequalities are ordered as
//! state-bound rows (`ξ - ξ_ub - s`, `ξ_lb - ξ - s` per stage), input-bound
//! rows (`u - u_ub`, `u_lb - u`) and slack signs (`-s`).

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};

use super::dynamics::{discrete_unchecked, jac_u, jac_xi, weighted_hessian, RigidBody};
use super::SpacecraftParams;
use crate::error::Result;
use crate::nlp::{Dims, ParameterizedNlp};

/// How many slack variables each stage carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlackMode {
    /// One slack per stage shared by all twelve state-bound rows.
    #[default]
    Scalar,
    /// One slack per state-bound row.
    Vector,
}

impl SlackMode {
    pub fn width(self) -> usize {
        match self {
            SlackMode::Scalar => 1,
            SlackMode::Vector => 12,
        }
    }
}

/// What a decision-vector entry represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Input `u_stage[component]`, stage in `0..N`.
    Input { stage: usize, component: usize },
    /// State `ξ_stage[component]`, stage in `1..=N`.
    State { stage: usize, component: usize },
    /// Slack `s_stage[component]`, stage in `1..=N`.
    Slack { stage: usize, component: usize },
}

/// Offsets of the stage blocks in `z`, `g` and `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OcpLayout {
    pub horizon: usize,
    pub slack_width: usize,
}

impl OcpLayout {
    pub fn dims(&self) -> Dims {
        let n = self.horizon;
        let w = self.slack_width;
        Dims {
            n: 9 * n + n * w,
            m: 6 * n,
            q: 18 * n + n * w,
            l: 12,
        }
    }

    /// `u_i`, `i ∈ 0..N`.
    pub fn input(&self, i: usize) -> Range<usize> {
        debug_assert!(i < self.horizon);
        3 * i..3 * i + 3
    }

    /// `ξ_j`, `j ∈ 1..=N`.
    pub fn state(&self, j: usize) -> Range<usize> {
        debug_assert!((1..=self.horizon).contains(&j));
        let base = 3 * self.horizon + 6 * (j - 1);
        base..base + 6
    }

    /// `s_j`, `j ∈ 1..=N`.
    pub fn slack(&self, j: usize) -> Range<usize> {
        debug_assert!((1..=self.horizon).contains(&j));
        let base = 9 * self.horizon + self.slack_width * (j - 1);
        base..base + self.slack_width
    }

    /// Defect `ξ_{i+1} - f_d(ξ_i, u_i)`, `i ∈ 0..N`.
    pub fn defect(&self, i: usize) -> Range<usize> {
        6 * i..6 * i + 6
    }

    /// Twelve state-bound rows of stage `j ∈ 1..=N`.
    pub fn state_rows(&self, j: usize) -> Range<usize> {
        12 * (j - 1)..12 * j
    }

    /// Six input-bound rows of stage `i ∈ 0..N`.
    pub fn input_rows(&self, i: usize) -> Range<usize> {
        let base = 12 * self.horizon + 6 * i;
        base..base + 6
    }

    /// Slack sign rows of stage `j ∈ 1..=N`.
    pub fn slack_rows(&self, j: usize) -> Range<usize> {
        let base = 18 * self.horizon + self.slack_width * (j - 1);
        base..base + self.slack_width
    }

    /// Slack index used by state-bound row `k ∈ 0..12` of stage `j`.
    pub fn slack_for_row(&self, j: usize, k: usize) -> usize {
        self.slack(j).start + if self.slack_width == 1 { 0 } else { k }
    }

    /// Meaning of every entry of `z`, in order.
    pub fn variables(&self) -> Vec<VarKind> {
        let mut out = Vec::with_capacity(self.dims().n);
        for stage in 0..self.horizon {
            out.extend((0..3).map(|component| VarKind::Input { stage, component }));
        }
        for stage in 1..=self.horizon {
            out.extend((0..6).map(|component| VarKind::State { stage, component }));
        }
        for stage in 1..=self.horizon {
            out.extend((0..self.slack_width).map(|component| VarKind::Slack { stage, component }));
        }
        out
    }

    /// Flat offset of a variable.
    pub fn offset(&self, var: VarKind) -> usize {
        match var {
            VarKind::Input { stage, component } => self.input(stage).start + component,
            VarKind::State { stage, component } => self.state(stage).start + component,
            VarKind::Slack { stage, component } => self.slack(stage).start + component,
        }
    }
}

/// The attitude OCP as a parameterized NLP.
#[derive(Clone, Debug)]
pub struct OcpInstance {
    pub params: SpacecraftParams,
    pub layout: OcpLayout,
    body: RigidBody,
}

/// Builds the transcription for validated parameters.
pub fn build_nlp(params: &SpacecraftParams, slack_mode: SlackMode) -> Result<OcpInstance> {
    params.validate()?;
    Ok(OcpInstance {
        body: params.body()?,
        layout: OcpLayout {
            horizon: params.horizon,
            slack_width: slack_mode.width(),
        },
        params: params.clone(),
    })
}

fn v6(x: &DVector<f64>, r: Range<usize>) -> Vector6<f64> {
    Vector6::from_iterator(x.rows(r.start, r.len()).iter().copied())
}

fn v3(x: &DVector<f64>, r: Range<usize>) -> Vector3<f64> {
    Vector3::from_iterator(x.rows(r.start, r.len()).iter().copied())
}

impl OcpInstance {
    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn slack_mode(&self) -> SlackMode {
        if self.layout.slack_width == 1 {
            SlackMode::Scalar
        } else {
            SlackMode::Vector
        }
    }

    pub fn body(&self) -> &RigidBody {
        &self.body
    }

    /// Parameter vector `(ξ_current, r)` from SI states.
    pub fn parameter(xi_current: &Vector6<f64>, reference: &Vector6<f64>) -> DVector<f64> {
        DVector::from_iterator(12, xi_current.iter().chain(reference.iter()).copied())
    }

    /// `ξ_i` for `i ∈ 0..=N`, with `ξ_0` taken from the parameter.
    pub fn stage_state(&self, z: &DVector<f64>, p: &DVector<f64>, i: usize) -> Vector6<f64> {
        if i == 0 {
            v6(p, 0..6)
        } else {
            v6(z, self.layout.state(i))
        }
    }

    pub fn stage_input(&self, z: &DVector<f64>, i: usize) -> Vector3<f64> {
        v3(z, self.layout.input(i))
    }

    /// Rolls the discrete model forward from `ξ_current` under `inputs` and
    /// packs the result into `z` with the given slack value.
    pub fn rollout(&self, xi_current: &Vector6<f64>, inputs: &[Vector3<f64>], slack: f64) -> DVector<f64> {
        let lay = self.layout;
        let mut z = DVector::zeros(lay.dims().n);
        let mut xi = *xi_current;
        for i in 0..lay.horizon {
            let u = inputs.get(i).copied().unwrap_or_else(Vector3::zeros);
            z.rows_mut(lay.input(i).start, 3).copy_from(&u);
            xi = discrete_unchecked(&xi, &u, &self.body);
            z.rows_mut(lay.state(i + 1).start, 6).copy_from(&xi);
            z.rows_mut(lay.slack(i + 1).start, lay.slack_width).fill(slack);
        }
        z
    }

    fn terminal_or_stage(&self, j: usize) -> &Matrix6<f64> {
        if j == self.layout.horizon {
            &self.params.terminal
        } else {
            &self.params.q
        }
    }
}

impl ParameterizedNlp for OcpInstance {
    fn dims(&self) -> Dims {
        self.layout.dims()
    }

    fn f(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let lay = self.layout;
        let r = v6(p, 6..12);
        let mut cost = 0.0;
        for i in 0..lay.horizon {
            let e = self.stage_state(z, p, i) - r;
            let u = self.stage_input(z, i);
            cost += e.dot(&(self.params.q * e)) + u.dot(&(self.params.r * u));
        }
        let e = self.stage_state(z, p, lay.horizon) - r;
        cost += e.dot(&(self.params.terminal * e));
        let s0 = lay.slack(1).start;
        cost + self.params.slack_weight * z.rows(s0, z.len() - s0).sum()
    }

    fn grad_f(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let lay = self.layout;
        let r = v6(p, 6..12);
        let mut g = DVector::zeros(z.len());
        for i in 0..lay.horizon {
            let u = self.stage_input(z, i);
            g.rows_mut(lay.input(i).start, 3).copy_from(&(self.params.r * u * 2.0));
        }
        for j in 1..=lay.horizon {
            let e = self.stage_state(z, p, j) - r;
            g.rows_mut(lay.state(j).start, 6)
                .copy_from(&(self.terminal_or_stage(j) * e * 2.0));
        }
        let s0 = lay.slack(1).start;
        g.rows_mut(s0, z.len() - s0).fill(self.params.slack_weight);
        g
    }

    fn g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let lay = self.layout;
        let mut out = DVector::zeros(lay.dims().m);
        for i in 0..lay.horizon {
            let next = discrete_unchecked(&self.stage_state(z, p, i), &self.stage_input(z, i), &self.body);
            let d = self.stage_state(z, p, i + 1) - next;
            out.rows_mut(lay.defect(i).start, 6).copy_from(&d);
        }
        out
    }

    fn jac_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let lay = self.layout;
        let dims = lay.dims();
        let mut out = DMatrix::zeros(dims.m, dims.n);
        let bu = -jac_u(&self.body) * self.body.tau;
        for i in 0..lay.horizon {
            let rows = lay.defect(i).start;
            out.view_mut((rows, lay.state(i + 1).start), (6, 6))
                .fill_with_identity();
            out.view_mut((rows, lay.input(i).start), (6, 3)).copy_from(&bu);
            if i >= 1 {
                let xi = self.stage_state(z, p, i);
                let a = -(Matrix6::identity() + jac_xi(&xi, &self.body) * self.body.tau);
                out.view_mut((rows, lay.state(i).start), (6, 6)).copy_from(&a);
            }
        }
        out
    }

    fn c(&self, z: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        let lay = self.layout;
        let prm = &self.params;
        let k = prm.state_row_scale;
        let mut out = DVector::zeros(lay.dims().q);
        for j in 1..=lay.horizon {
            let xi = v6(z, lay.state(j));
            let rows = lay.state_rows(j).start;
            for c in 0..6 {
                out[rows + c] = k * (xi[c] - prm.xi_ub[c]) - z[lay.slack_for_row(j, c)];
                out[rows + 6 + c] = k * (prm.xi_lb[c] - xi[c]) - z[lay.slack_for_row(j, 6 + c)];
            }
            for (r, s) in lay.slack_rows(j).zip(lay.slack(j)) {
                out[r] = -z[s];
            }
        }
        for i in 0..lay.horizon {
            let u = self.stage_input(z, i);
            let rows = lay.input_rows(i).start;
            for c in 0..3 {
                out[rows + c] = u[c] - prm.u_ub[c];
                out[rows + 3 + c] = prm.u_lb[c] - u[c];
            }
        }
        out
    }

    fn jac_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        let lay = self.layout;
        let dims = lay.dims();
        let k = self.params.state_row_scale;
        let mut out = DMatrix::zeros(dims.q, dims.n);
        for j in 1..=lay.horizon {
            let rows = lay.state_rows(j).start;
            let cols = lay.state(j).start;
            for c in 0..6 {
                out[(rows + c, cols + c)] = k;
                out[(rows + 6 + c, cols + c)] = -k;
            }
            for r in 0..12 {
                out[(rows + r, lay.slack_for_row(j, r))] = -1.0;
            }
            for (r, s) in lay.slack_rows(j).zip(lay.slack(j)) {
                out[(r, s)] = -1.0;
            }
        }
        for i in 0..lay.horizon {
            let rows = lay.input_rows(i).start;
            let cols = lay.input(i).start;
            for c in 0..3 {
                out[(rows + c, cols + c)] = 1.0;
                out[(rows + 3 + c, cols + c)] = -1.0;
            }
        }
        out
    }

    fn hess_lagrangian(
        &self,
        z: &DVector<f64>,
        lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        let lay = self.layout;
        let n = lay.dims().n;
        let mut h = DMatrix::zeros(n, n);
        let r2 = self.params.r * 2.0;
        for i in 0..lay.horizon {
            let o = lay.input(i).start;
            h.view_mut((o, o), (3, 3)).copy_from(&r2);
        }
        for j in 1..=lay.horizon {
            let o = lay.state(j).start;
            let mut block = self.terminal_or_stage(j) * 2.0;
            if j < lay.horizon {
                // Defect j depends on ξ_j through -f_d(ξ_j, u_j).
                let mu = v6(lambda, lay.defect(j));
                block -= weighted_hessian(&v6(z, lay.state(j)), &mu, &self.body) * self.body.tau;
            }
            h.view_mut((o, o), (6, 6)).copy_from(&block);
        }
        h
    }

    fn jac_pz_lagrangian(
        &self,
        _z: &DVector<f64>,
        _lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        let lay = self.layout;
        let mut out = DMatrix::zeros(lay.dims().n, 12);
        for j in 1..=lay.horizon {
            let block = self.terminal_or_stage(j) * -2.0;
            out.view_mut((lay.state(j).start, 6), (6, 6)).copy_from(&block);
        }
        out
    }

    fn jac_p_g(&self, _z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let lay = self.layout;
        let mut out = DMatrix::zeros(lay.dims().m, 12);
        let xi0 = v6(p, 0..6);
        let a = -(Matrix6::identity() + jac_xi(&xi0, &self.body) * self.body.tau);
        out.view_mut((0, 0), (6, 6)).copy_from(&a);
        out
    }

    fn jac_p_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.layout.dims().q, 12)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::nlp::{kkt_residual, PrimalDual};
    use crate::ocp::Case;

    fn instance(case: Case, n: usize, mode: SlackMode) -> OcpInstance {
        build_nlp(&SpacecraftParams::benchmark(case, n).unwrap(), mode).unwrap()
    }

    #[test]
    fn dimensions() {
        let one = instance(Case::One, 1, SlackMode::Scalar);
        assert_eq!(one.dims(), Dims { n: 10, m: 6, q: 19, l: 12 });
        let vec = instance(Case::Two, 4, SlackMode::Vector);
        assert_eq!(vec.dims(), Dims { n: 36 + 48, m: 24, q: 72 + 48, l: 12 });
    }

    #[test]
    fn layout_is_a_bijection() {
        for mode in [SlackMode::Scalar, SlackMode::Vector] {
            let lay = instance(Case::Two, 5, mode).layout;
            let vars = lay.variables();
            assert_eq!(vars.len(), lay.dims().n);
            let offsets: HashSet<usize> = vars.iter().map(|&v| lay.offset(v)).collect();
            assert_eq!(offsets.len(), vars.len());
            for (k, v) in vars.iter().enumerate() {
                assert_eq!(lay.offset(*v), k);
            }
        }
    }

    #[test]
    fn residual_at_origin_is_slack_weight() {
        for n in [1, 3, 15] {
            let ocp = instance(Case::One, n, SlackMode::Scalar);
            let x = PrimalDual::zeros(ocp.dims());
            let p = DVector::zeros(12);
            let res = kkt_residual(&ocp, &x, &p).unwrap();
            assert!((res.norm - 10.0 * (n as f64).sqrt()).abs() < 1e-12);
            let lay = ocp.layout;
            let s0 = lay.slack(1).start;
            assert_eq!(res.stationarity.rows(0, s0).norm(), 0.0);
        }
    }

    #[test]
    fn rollout_has_zero_defects() {
        let ocp = instance(Case::Two, 6, SlackMode::Scalar);
        let xi0 = Vector6::new(0.01, -0.02, 0.005, 0.1, 0.2, -0.3);
        let inputs: Vec<_> = (0..6).map(|i| Vector3::new(0.3 * i as f64, -1.0, 0.5)).collect();
        let z = ocp.rollout(&xi0, &inputs, 1e-3);
        let p = OcpInstance::parameter(&xi0, &Vector6::zeros());
        assert_eq!(ocp.g(&z, &p).amax(), 0.0);
    }
}
