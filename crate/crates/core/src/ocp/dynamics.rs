//! Rigid-body attitude dynamics with 3-2-1 Euler-angle kinematics.
//!
//! The state is `ξ = (ω, θ)` in SI units (rad/s, rad). Degrees only appear
//! at the external interface (configuration, bounds, traces).

use nalgebra::{Matrix3, Matrix6, Matrix6x3, Vector3, Vector6};

use crate::error::{Error, Result};

/// Pitch margin from ±90° (in degrees) inside which the kinematics are
/// reported as singular.
pub const PITCH_SINGULARITY_MARGIN_DEG: f64 = 1e-6;

/// Inertia and sampling period: everything the equations of motion need.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidBody {
    pub inertia: Matrix3<f64>,
    pub inertia_inv: Matrix3<f64>,
    pub tau: f64,
}

impl RigidBody {
    pub fn new(inertia: Matrix3<f64>, tau: f64) -> Result<Self> {
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::InvalidParams("inertia matrix is singular".into()))?;
        Ok(Self {
            inertia,
            inertia_inv,
            tau,
        })
    }
}

fn check_pitch(theta: &Vector3<f64>) -> Result<()> {
    let pitch_deg = theta[1].to_degrees();
    if !(pitch_deg.abs() < 90.0 - PITCH_SINGULARITY_MARGIN_DEG) {
        return Err(Error::KinematicSingularity { pitch_deg });
    }
    Ok(())
}

/// `S(θ)` mapping body rates to 3-2-1 Euler angle rates (θ in radians).
pub fn kinematics_matrix(theta: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_pitch(theta)?;
    Ok(kinematics_unchecked(theta))
}

pub(crate) fn kinematics_unchecked(theta: &Vector3<f64>) -> Matrix3<f64> {
    let (s1, c1) = theta[0].sin_cos();
    let t2 = theta[1].tan();
    let sec2 = 1.0 / theta[1].cos();
    Matrix3::new(
        1.0,
        s1 * t2,
        c1 * t2,
        0.0,
        c1,
        -s1,
        0.0,
        s1 * sec2,
        c1 * sec2,
    )
}

fn split(xi: &Vector6<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (xi.fixed_rows::<3>(0).into_owned(), xi.fixed_rows::<3>(3).into_owned())
}

/// Continuous-time `ξ̇ = f_c(ξ, u) = [J⁻¹(u - ω×Jω); S(θ)ω]`.
pub fn dynamics_ct(xi: &Vector6<f64>, u: &Vector3<f64>, body: &RigidBody) -> Result<Vector6<f64>> {
    check_pitch(&xi.fixed_rows::<3>(3).into_owned())?;
    Ok(dynamics_unchecked(xi, u, body))
}

pub(crate) fn dynamics_unchecked(xi: &Vector6<f64>, u: &Vector3<f64>, body: &RigidBody) -> Vector6<f64> {
    let (w, th) = split(xi);
    let wdot = body.inertia_inv * (u - w.cross(&(body.inertia * w)));
    let thdot = kinematics_unchecked(&th) * w;
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&wdot);
    out.fixed_rows_mut::<3>(3).copy_from(&thdot);
    out
}

/// Explicit Euler step `ξ + τ f_c(ξ, u)`.
pub fn discrete_dynamics(xi: &Vector6<f64>, u: &Vector3<f64>, body: &RigidBody) -> Result<Vector6<f64>> {
    Ok(xi + dynamics_ct(xi, u, body)? * body.tau)
}

pub(crate) fn discrete_unchecked(xi: &Vector6<f64>, u: &Vector3<f64>, body: &RigidBody) -> Vector6<f64> {
    xi + dynamics_unchecked(xi, u, body) * body.tau
}

/// Classical RK4 over one sampling period with `h = τ/substeps`, zero-order
/// hold on `u`.
pub fn rk4_step(
    xi: &Vector6<f64>,
    u: &Vector3<f64>,
    body: &RigidBody,
    duration: f64,
    substeps: usize,
) -> Result<Vector6<f64>> {
    let h = duration / substeps as f64;
    let mut x = *xi;
    for _ in 0..substeps {
        let k1 = dynamics_ct(&x, u, body)?;
        let k2 = dynamics_ct(&(x + k1 * (h / 2.0)), u, body)?;
        let k3 = dynamics_ct(&(x + k2 * (h / 2.0)), u, body)?;
        let k4 = dynamics_ct(&(x + k3 * h), u, body)?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(x)
}

/// Skew-symmetric matrix with `skew(a) b = a × b`.
fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0)
}

/// `∂f_c/∂ξ` (independent of `u`).
pub(crate) fn jac_xi(xi: &Vector6<f64>, body: &RigidBody) -> Matrix6<f64> {
    let (w, th) = split(xi);
    let jw = body.inertia * w;
    // d(ω × Jω)/dω = [ω]×J - [Jω]×
    let dw = -body.inertia_inv * (skew(&w) * body.inertia - skew(&jw));

    let (s1, c1) = th[0].sin_cos();
    let t2 = th[1].tan();
    let sec2 = 1.0 / th[1].cos();
    let a = s1 * w[1] + c1 * w[2];
    let b = c1 * w[1] - s1 * w[2];
    let dth = Matrix3::new(
        t2 * b,
        sec2 * sec2 * a,
        0.0,
        -a,
        0.0,
        0.0,
        sec2 * b,
        sec2 * t2 * a,
        0.0,
    );

    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&dw);
    out.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&kinematics_unchecked(&th));
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&dth);
    out
}

/// `∂f_c/∂u = [J⁻¹; 0]`.
pub(crate) fn jac_u(body: &RigidBody) -> Matrix6x3<f64> {
    let mut out = Matrix6x3::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&body.inertia_inv);
    out
}

/// `∇²_ξ (μᵀ f_c(ξ, u))`; `u` enters linearly and has no cross terms.
pub(crate) fn weighted_hessian(xi: &Vector6<f64>, mu: &Vector6<f64>, body: &RigidBody) -> Matrix6<f64> {
    let (w, th) = split(xi);
    let (mu_w, mu_t) = split(mu);

    // -μ_wᵀ J⁻¹ (ω × Jω): with a = J⁻ᵀμ_w the Hessian is [a]×J - J[a]×.
    let a = body.inertia_inv.transpose() * mu_w;
    let sa = skew(&a);
    let hww = sa * body.inertia - body.inertia * sa;

    let (s1, c1) = th[0].sin_cos();
    let t2 = th[1].tan();
    let sec2 = 1.0 / th[1].cos();
    let aa = s1 * w[1] + c1 * w[2];
    let bb = c1 * w[1] - s1 * w[2];
    let (m1, m2, m3) = (mu_t[0], mu_t[1], mu_t[2]);
    let k = m1 * sec2 * sec2 + m3 * sec2 * t2;

    // θθ block of μ_θᵀ S(θ) ω.
    let h11 = -m1 * t2 * aa - m2 * bb - m3 * sec2 * aa;
    let h12 = k * bb;
    let h22 = aa * (2.0 * m1 * sec2 * sec2 * t2 + m3 * (sec2 * t2 * t2 + sec2 * sec2 * sec2));
    let htt = Matrix3::new(h11, h12, 0.0, h12, h22, 0.0, 0.0, 0.0, 0.0);

    // ωθ block: rows ω_j, columns θ_k of ∂(Sᵀμ_θ)_j/∂θ_k.
    let hwt = Matrix3::new(
        0.0,
        0.0,
        0.0,
        m1 * c1 * t2 - m2 * s1 + m3 * c1 * sec2,
        s1 * k,
        0.0,
        -m1 * s1 * t2 - m2 * c1 - m3 * s1 * sec2,
        c1 * k,
        0.0,
    );

    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&hww);
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&hwt);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&hwt.transpose());
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&htt);
    out
}

/// Discrete-time linearization about `ξ = 0, u = 0`:
/// `A = I + τ ∂f_c/∂ξ`, `B = τ ∂f_c/∂u`.
pub fn linearize_origin(body: &RigidBody) -> (Matrix6<f64>, Matrix6x3<f64>) {
    let a = Matrix6::identity() + jac_xi(&Vector6::zeros(), body) * body.tau;
    let b = jac_u(body) * body.tau;
    (a, b)
}

/// Rotational kinetic energy `½ωᵀJω`.
pub fn kinetic_energy(xi: &Vector6<f64>, body: &RigidBody) -> f64 {
    let w = xi.fixed_rows::<3>(0);
    0.5 * w.dot(&(body.inertia * w))
}
