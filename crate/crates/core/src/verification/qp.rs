//! Parameterized convex QPs and a brute-force active-set oracle.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nlp::{Dims, ParameterizedNlp, PrimalDual};

/// `min ½ z'Hz + h(p)'z  s.t.  A_eq z = b_eq(p),  A_in z <= b_in(p)`
/// with every parameter dependence affine:
/// `h(p) = h0 + Hp p`, `b_eq(p) = b_eq0 + Bp_eq p`, `b_in(p) = b_in0 + Bp_in p`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpSpec {
    pub hessian: DMatrix<f64>,
    pub h0: DVector<f64>,
    pub h_p: DMatrix<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq0: DVector<f64>,
    pub b_eq_p: DMatrix<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in0: DVector<f64>,
    pub b_in_p: DMatrix<f64>,
}

impl QpSpec {
    /// `min ½(z - p)²  s.t.  z <= 0`.
    pub fn scalar_bound() -> Self {
        Self {
            hessian: DMatrix::identity(1, 1),
            h0: DVector::zeros(1),
            h_p: DMatrix::from_element(1, 1, -1.0),
            a_eq: DMatrix::zeros(0, 1),
            b_eq0: DVector::zeros(0),
            b_eq_p: DMatrix::zeros(0, 1),
            a_in: DMatrix::identity(1, 1),
            b_in0: DVector::zeros(1),
            b_in_p: DMatrix::zeros(1, 1),
        }
    }

    /// `min ½z² s.t. z - p <= 0`: the parameter enters only the constraint.
    pub fn scalar_moving_bound() -> Self {
        Self {
            h_p: DMatrix::zeros(1, 1),
            b_in_p: DMatrix::from_element(1, 1, 1.0),
            ..Self::scalar_bound()
        }
    }

    /// `min ½z'Hz - p'z` without constraints.
    pub fn unconstrained(hessian: DMatrix<f64>) -> Self {
        let n = hessian.nrows();
        Self {
            hessian,
            h0: DVector::zeros(n),
            h_p: -DMatrix::identity(n, n),
            a_eq: DMatrix::zeros(0, n),
            b_eq0: DVector::zeros(0),
            b_eq_p: DMatrix::zeros(0, n),
            a_in: DMatrix::zeros(0, n),
            b_in0: DVector::zeros(0),
            b_in_p: DMatrix::zeros(0, n),
        }
    }

    pub fn linear_term(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.h0 + &self.h_p * p
    }

    pub fn b_eq(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.b_eq0 + &self.b_eq_p * p
    }

    pub fn b_in(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.b_in0 + &self.b_in_p * p
    }

    /// Draws a strongly convex QP with `m + q <= n`, so every subset of
    /// constraint rows is (almost surely) linearly independent.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_q: usize, l: usize) -> Self {
        let n = rng.random_range(2..=max_n.max(2));
        let m = if n > 2 && rng.random_bool(0.3) { 1 } else { 0 };
        let q = rng.random_range(1..=max_q.min(n - m).max(1));
        let mut normal = |r: usize, c: usize| -> DMatrix<f64> {
            DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut *rng))
        };
        let root = normal(n, n);
        let hessian = root.tr_mul(&root) * 0.5 + DMatrix::identity(n, n);
        let h0 = normal(n, 1).column(0).into_owned();
        let h_p = normal(n, l);
        let a_eq = normal(m, n);
        let b_eq0 = normal(m, 1).column(0).into_owned() * 0.5;
        let b_eq_p = normal(m, l) * 0.5;
        let a_in = normal(q, n);
        let b_in0 = normal(q, 1).column(0).into_owned();
        let b_in_p = normal(q, l);
        Self {
            hessian,
            h0,
            h_p,
            a_eq,
            b_eq0,
            b_eq_p,
            a_in,
            b_in0,
            b_in_p,
        }
    }
}

impl ParameterizedNlp for QpSpec {
    fn dims(&self) -> Dims {
        Dims {
            n: self.hessian.nrows(),
            m: self.a_eq.nrows(),
            q: self.a_in.nrows(),
            l: self.h_p.ncols(),
        }
    }

    fn f(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + self.linear_term(p).dot(z)
    }

    fn grad_f(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        &self.hessian * z + self.linear_term(p)
    }

    fn g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        &self.a_eq * z - self.b_eq(p)
    }

    fn jac_g(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        self.a_eq.clone()
    }

    fn c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        &self.a_in * z - self.b_in(p)
    }

    fn jac_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        self.a_in.clone()
    }

    fn hess_lagrangian(
        &self,
        _z: &DVector<f64>,
        _lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.hessian.clone()
    }

    fn jac_pz_lagrangian(
        &self,
        _z: &DVector<f64>,
        _lambda: &DVector<f64>,
        _v: &DVector<f64>,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.h_p.clone()
    }

    fn jac_p_g(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        -&self.b_eq_p
    }

    fn jac_p_c(&self, _z: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        -&self.b_in_p
    }
}

/// Solves a small QP by enumerating all `2^q` active sets.
///
/// Each candidate set's equality-constrained KKT system is solved with a
/// full-pivoting LU; a candidate is accepted if it is primal feasible and its
/// active multipliers are nonnegative. Candidates that coincide (a constraint
/// weakly active at a kink) are merged; genuinely distinct survivors are
/// reported as degeneracy.
pub fn active_set_oracle(qp: &QpSpec, p: &DVector<f64>) -> Result<PrimalDual> {
    let dims = qp.dims();
    let (n, m, q) = (dims.n, dims.m, dims.q);
    assert!(q <= 16, "active-set enumeration is exponential in q");

    let rhs_h = -qp.linear_term(p);
    let b_eq = qp.b_eq(p);
    let b_in = qp.b_in(p);
    let scale = 1.0 + rhs_h.amax() + b_eq.amax().max(b_in.amax());
    let feas_tol = 1e-10 * scale;

    let mut found: Vec<PrimalDual> = Vec::new();
    for mask in 0u32..(1u32 << q) {
        let active: Vec<usize> = (0..q).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len();
        let size = n + m + k;
        let mut kkt = DMatrix::zeros(size, size);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
        kkt.view_mut((n, 0), (m, n)).copy_from(&qp.a_eq);
        kkt.view_mut((0, n), (n, m)).copy_from(&qp.a_eq.transpose());
        let mut rhs = DVector::zeros(size);
        rhs.rows_mut(0, n).copy_from(&rhs_h);
        rhs.rows_mut(n, m).copy_from(&b_eq);
        for (j, &i) in active.iter().enumerate() {
            let row = qp.a_in.row(i);
            kkt.view_mut((n + m + j, 0), (1, n)).copy_from(&row);
            kkt.view_mut((0, n + m + j), (n, 1)).copy_from(&row.transpose());
            rhs[n + m + j] = b_in[i];
        }
        let lu = kkt.clone().full_piv_lu();
        if !lu.is_invertible() {
            continue;
        }
        let Some(sol) = lu.solve(&rhs) else {
            continue;
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 * scale {
            continue;
        }
        let z = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, m).into_owned();
        let mut v = DVector::zeros(q);
        for (j, &i) in active.iter().enumerate() {
            v[i] = sol[n + m + j];
        }
        let c = &qp.a_in * &z - &b_in;
        let feasible = c.iter().all(|&ci| ci <= feas_tol);
        let dual_ok = v.iter().all(|&vi| vi >= -feas_tol);
        if !(feasible && dual_ok) {
            continue;
        }
        let cand = PrimalDual::new(z, lambda, v);
        let cand_vec = cand.to_vector();
        let duplicate = found.iter().any(|f| {
            let d = (f.to_vector() - &cand_vec).amax();
            d <= 1e-8 * (1.0 + cand_vec.amax())
        });
        if !duplicate {
            found.push(cand);
        }
    }
    match found.len() {
        0 => Err(Error::Infeasible),
        1 => Ok(found.pop().unwrap()),
        count => Err(Error::Degenerate { count }),
    }
}

/// Indices of inequality rows that are active (`|c_i| <= tol`).
pub fn active_set(qp: &QpSpec, x: &PrimalDual, p: &DVector<f64>, tol: f64) -> Vec<usize> {
    let c = qp.c(&x.z, p);
    (0..c.len()).filter(|&i| c[i].abs() <= tol).collect()
}

/// Strict-complementarity margin `min_i max(-c_i, v_i)`; `+inf` when `q = 0`.
pub fn complementarity_margin<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
) -> f64 {
    let c = nlp.c(&x.z, p);
    c.iter()
        .zip(x.v.iter())
        .map(|(ci, vi)| (-ci).max(*vi))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::kkt_residual;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solve_scalar(p: f64) -> (f64, f64) {
        let sol = active_set_oracle(&QpSpec::scalar_bound(), &dvector![p]).unwrap();
        (sol.z[0], sol.v[0])
    }

    #[test]
    fn scalar_oracle_branches() {
        assert_eq!(solve_scalar(-1.0), (-1.0, 0.0));
        assert_eq!(solve_scalar(1.0), (0.0, 1.0));
        assert_eq!(solve_scalar(0.0), (0.0, 0.0));
    }

    #[test]
    fn oracle_solutions_are_kkt_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let qp = QpSpec::random(&mut rng, 5, 4, 2);
            let p = dvector![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let sol = active_set_oracle(&qp, &p).unwrap();
            let res = kkt_residual(&qp, &sol, &p).unwrap();
            assert!(res.norm < 1e-9, "residual {}", res.norm);
        }
    }

    #[test]
    fn infeasible_qp_is_reported() {
        // z <= -1 and -z <= -1 cannot both hold.
        let qp = QpSpec {
            a_in: DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            b_in0: dvector![-1.0, -1.0],
            b_in_p: DMatrix::zeros(2, 1),
            ..QpSpec::scalar_bound()
        };
        assert!(matches!(
            active_set_oracle(&qp, &dvector![0.0]),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn duplicated_constraint_is_degenerate() {
        // z <= 0 twice: the multiplier split is not unique once active.
        let qp = QpSpec {
            a_in: DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            b_in0: dvector![0.0, 0.0],
            b_in_p: DMatrix::zeros(2, 1),
            ..QpSpec::scalar_bound()
        };
        // Both single-row sets give distinct multiplier vectors.
        assert!(matches!(
            active_set_oracle(&qp, &dvector![1.0]),
            Err(Error::Degenerate { count: 2 })
        ));
    }
}
