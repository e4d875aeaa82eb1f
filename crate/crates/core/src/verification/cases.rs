//! Randomized and hand-labeled instances for the QP oracle checks.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::qp::{active_set, active_set_oracle, complementarity_margin, QpSpec};
use super::{licq_check, ssosc_check, ACTIVITY_TOL};
use crate::error::Result;
use crate::nlp::PrimalDual;
use crate::parallel::{map_slice, Execution};
use crate::sspc::{track, SolverConfig};

/// Strict-complementarity margin required at both path endpoints.
pub const MIN_MARGIN: f64 = 1e-3;

/// A QP with two parameters and the oracle solution at the first.
#[derive(Clone, Debug)]
pub struct OracleCase {
    pub qp: QpSpec,
    pub p0: DVector<f64>,
    pub p1: DVector<f64>,
    pub x0: PrimalDual,
    pub x1: PrimalDual,
    /// True when the active sets at `p0` and `p1` differ.
    pub active_set_changes: bool,
}

fn random_unit<R: Rng>(rng: &mut R, l: usize) -> DVector<f64> {
    loop {
        let d = DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0));
        let n = d.norm();
        if n > 1e-3 {
            return d / n;
        }
    }
}

fn solved(qp: &QpSpec, p: &DVector<f64>) -> Option<PrimalDual> {
    let x = active_set_oracle(qp, p).ok()?;
    (complementarity_margin(qp, &x, p) >= MIN_MARGIN).then_some(x)
}

/// Draws `count` strictly complementary cases with `‖p1 - p0‖ <= 2κ`;
/// every other case is resampled until its active set changes between the
/// endpoints.
pub fn generate_oracle_cases(seed: u64, count: usize, kappa: f64) -> Vec<OracleCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let want_change = out.len() % 2 == 0;
        let qp = QpSpec::random(&mut rng, 5, 4, 2);
        for _ in 0..200 {
            let p0 = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
            let Some(x0) = solved(&qp, &p0) else { continue };
            let dp = random_unit(&mut rng, 2) * rng.random_range(0.05..=2.0 * kappa);
            let p1 = &p0 + dp;
            let Some(x1) = solved(&qp, &p1) else { continue };
            let changes = active_set(&qp, &x0, &p0, 1e-9) != active_set(&qp, &x1, &p1, 1e-9);
            if want_change && !changes {
                continue;
            }
            out.push(OracleCase {
                qp,
                p0,
                p1,
                x0,
                x1,
                active_set_changes: changes,
            });
            break;
        }
    }
    out
}

/// Outcome of tracking one oracle case.
#[derive(Clone, Debug)]
pub struct OracleCheck {
    /// `‖x_track - x_oracle‖_∞` over the full primal-dual vector.
    pub error: f64,
    pub grid_steps: usize,
    pub corrector_iters: usize,
}

pub fn check_oracle_case(case: &OracleCase, cfg: &SolverConfig) -> Result<OracleCheck> {
    let (x, report) = track(&case.qp, &case.x0, &case.p0, &case.p1, cfg)?;
    Ok(OracleCheck {
        error: (x.to_vector() - case.x1.to_vector()).amax(),
        grid_steps: report.grid_steps,
        corrector_iters: report.total_corrector_iters(),
    })
}

/// Tracks every case, scheduled by `exec`.
pub fn check_oracle_cases(
    cases: &[OracleCase],
    cfg: &SolverConfig,
    exec: Execution,
) -> Vec<Result<OracleCheck>> {
    map_slice(exec, cases, |c| check_oracle_case(c, cfg))
}

/// Ratios `‖x*(p_{k+1}) - x*(p_k)‖ / ‖p_{k+1} - p_k‖` of oracle solutions
/// sampled along `p0 + t d`, `t ∈ [0, span]`.
pub fn lipschitz_ratios(
    qp: &QpSpec,
    p0: &DVector<f64>,
    direction: &DVector<f64>,
    span: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    let xs = (0..=samples)
        .map(|k| {
            let p = p0 + direction * (span * k as f64 / samples as f64);
            active_set_oracle(qp, &p).map(|x| (p, x.to_vector()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(xs
        .windows(2)
        .map(|w| (&w[1].1 - &w[0].1).norm() / (&w[1].0 - &w[0].0).norm())
        .collect())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A point with known constraint-qualification status.
#[derive(Clone, Debug)]
pub struct LabeledInstance {
    pub name: &'static str,
    pub qp: QpSpec,
    pub x: PrimalDual,
    pub p: DVector<f64>,
    pub licq: bool,
    pub ssosc: bool,
}

impl LabeledInstance {
    /// `(licq_check, ssosc_check)` at the default activity tolerance.
    pub fn classify(&self) -> Result<(bool, bool)> {
        Ok((
            licq_check(&self.qp, &self.x, &self.p, ACTIVITY_TOL)?,
            ssosc_check(&self.qp, &self.x, &self.p, ACTIVITY_TOL)?,
        ))
    }
}

fn labeled(
    name: &'static str,
    hessian: DMatrix<f64>,
    a_eq: DMatrix<f64>,
    a_in: DMatrix<f64>,
    b_in: DVector<f64>,
    x: (DVector<f64>, DVector<f64>, DVector<f64>),
    licq: bool,
    ssosc: bool,
) -> LabeledInstance {
    let n = hessian.nrows();
    let (m, q) = (a_eq.nrows(), a_in.nrows());
    let qp = QpSpec {
        hessian,
        h0: DVector::zeros(n),
        h_p: DMatrix::zeros(n, 1),
        a_eq,
        b_eq0: DVector::zeros(m),
        b_eq_p: DMatrix::zeros(m, 1),
        a_in,
        b_in0: b_in,
        b_in_p: DMatrix::zeros(q, 1),
    };
    LabeledInstance {
        name,
        qp,
        x: PrimalDual::new(x.0, x.1, x.2),
        p: DVector::zeros(1),
        licq,
        ssosc,
    }
}

/// Ten hand-classified instances. The point is `z = 0` unless stated, and
/// `b_in` decides which inequalities are active there.
pub fn labeled_battery() -> Vec<LabeledInstance> {
    let e = || DVector::zeros(0);
    let none = |n: usize| DMatrix::zeros(0, n);
    vec![
        labeled(
            "unconstrained positive definite",
            dmatrix![2.0, 0.0; 0.0, 1.0],
            none(2),
            none(2),
            e(),
            (dvector![0.0, 0.0], e(), e()),
            true,
            true,
        ),
        labeled(
            "unconstrained indefinite",
            dmatrix![1.0, 0.0; 0.0, -1.0],
            none(2),
            none(2),
            e(),
            (dvector![0.0, 0.0], e(), e()),
            true,
            false,
        ),
        labeled(
            "equality removes negative curvature",
            dmatrix![-1.0, 0.0; 0.0, 1.0],
            dmatrix![1.0, 0.0],
            none(2),
            e(),
            (dvector![0.0, 0.0], dvector![0.0], e()),
            true,
            true,
        ),
        labeled(
            "equality keeps negative curvature",
            dmatrix![-1.0, 0.0; 0.0, 1.0],
            dmatrix![0.0, 1.0],
            none(2),
            e(),
            (dvector![0.0, 0.0], dvector![0.0], e()),
            true,
            false,
        ),
        labeled(
            "orthogonal active bounds",
            DMatrix::identity(2, 2),
            none(2),
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dvector![0.0, 0.0],
            (dvector![0.0, 0.0], e(), dvector![1.0, 1.0]),
            true,
            true,
        ),
        labeled(
            "parallel active rows",
            DMatrix::identity(2, 2),
            none(2),
            dmatrix![1.0, 0.0; 2.0, 0.0],
            dvector![0.0, 0.0],
            (dvector![0.0, 0.0], e(), dvector![1.0, 0.0]),
            false,
            true,
        ),
        labeled(
            "three active rows in the plane",
            DMatrix::identity(2, 2),
            none(2),
            dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0],
            dvector![0.0, 0.0, 0.0],
            (dvector![0.0, 0.0], e(), dvector![1.0, 1.0, 0.0]),
            false,
            true,
        ),
        labeled(
            "inactive dependent rows are ignored",
            DMatrix::identity(2, 2),
            none(2),
            dmatrix![1.0, 0.0; 2.0, 0.0],
            dvector![1.0, 1.0],
            (dvector![0.0, 0.0], e(), dvector![0.0, 0.0]),
            true,
            true,
        ),
        labeled(
            "strongly active row removes negative curvature",
            dmatrix![-1.0, 0.0; 0.0, 2.0],
            none(2),
            dmatrix![1.0, 0.0],
            dvector![0.0],
            (dvector![0.0, 0.0], e(), dvector![1.0]),
            true,
            true,
        ),
        labeled(
            "weakly active row leaves negative curvature",
            dmatrix![-1.0, 0.0; 0.0, 2.0],
            none(2),
            dmatrix![1.0, 0.0],
            dvector![0.0],
            (dvector![0.0, 0.0], e(), dvector![0.0]),
            true,
            false,
        ),
    ]
}
