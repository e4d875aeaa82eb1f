//! Instance generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sspc::ocp::{state_to_si, OcpInstance};
use sspc::{GammaVector, JacobianX, ParameterizedNlp, PrimalDual};

/// State with rates in ±11 deg/s and angles in ±60 deg, in SI units.
pub fn random_state(rng: &mut ChaCha8Rng) -> Vector6<f64> {
    state_to_si(&Vector6::from_fn(|i, _| {
        if i < 3 {
            rng.random_range(-11.0..11.0)
        } else {
            rng.random_range(-60.0..60.0)
        }
    }))
}

/// A strictly complementary point of the transcribed OCP: rows within one
/// unit of their bound (or violating it) get an active multiplier with a
/// margin of at least 0.1, every other row gets `v = 0`.
pub fn spacecraft_point(ocp: &OcpInstance, rng: &mut ChaCha8Rng) -> (PrimalDual, DVector<f64>) {
    let d = ocp.dims();
    let lay = ocp.layout;
    let p = OcpInstance::parameter(&random_state(rng), &random_state(rng));
    let mut z = DVector::zeros(d.n);
    for i in 0..lay.horizon {
        let u = Vector3::from_fn(|_, _| rng.random_range(-2.5..2.5));
        z.rows_mut(lay.input(i).start, 3).copy_from(&u);
        let xi = random_state(rng);
        z.rows_mut(lay.state(i + 1).start, 6).copy_from(&xi);
        for k in lay.slack(i + 1) {
            z[k] = rng.random_range(0.05..0.5);
        }
    }
    let c = ocp.c(&z, &p);
    let v = DVector::from_fn(d.q, |i, _| {
        if -c[i] < 1.0 {
            (-c[i]).max(0.0) + rng.random_range(0.1..1.0)
        } else {
            0.0
        }
    });
    let lambda = DVector::from_fn(d.m, |_, _| rng.random_range(-1.0..1.0));
    (PrimalDual::new(z, lambda, v), p)
}

fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut *rng))
}

/// Random regular iteration matrix with a positive definite Hessian block,
/// full-row-rank `∇g`, random selection and `δ = 1e-2`, plus a right-hand side.
pub fn random_regular_system(rng: &mut ChaCha8Rng) -> (JacobianX, DVector<f64>) {
    let n = rng.random_range(2..=8);
    let m = rng.random_range(0..=n / 2);
    let q = rng.random_range(1..=6);
    let root = normal(rng, n, n);
    let hessian = root.tr_mul(&root) + DMatrix::identity(n, n);
    let jac_g = normal(rng, m, n);
    let jac_c = normal(rng, q, n);
    let gamma = GammaVector(DVector::from_fn(q, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 }));
    let delta = 1e-2;
    let d_hat = gamma.d_diag().add_scalar(delta);
    let rhs = normal(rng, n + m + q, 1).column(0).into_owned();
    (
        JacobianX {
            hessian,
            jac_g,
            jac_c,
            gamma,
            d_hat,
            delta,
        },
        rhs,
    )
}

/// `(‖Δp‖, κ, M)` with `M = max(1, ceil(‖Δp‖/κ))` worked by hand.
pub const GRID_TABLE: [(f64, f64, usize); 20] = [
    (0.0, 0.5, 1),
    (1e-12, 0.5, 1),
    (0.1, 0.5, 1),
    (0.5, 0.5, 1),
    (0.5000001, 0.5, 2),
    (1.0, 0.5, 2),
    (1.0000001, 0.5, 3),
    (1.5, 0.5, 3),
    (3.0 * 0.1, 0.1, 3),
    (0.3000001, 0.1, 4),
    (7.0 * 0.1, 0.1, 7),
    (0.25, 0.1, 3),
    (3.0 * 0.2, 0.2, 3),
    (0.6000001, 0.2, 4),
    (2.0, 1.0, 2),
    (2.9, 1.0, 3),
    (12.0 * 0.25, 0.25, 12),
    (9.0, 3.0, 3),
    (10.0, 3.0, 4),
    (100.0, 0.5, 200),
];
