//! Elements of the generalized Jacobians of `F(x, p)`.
//!
//! For the min NCP rows, the selection `γ_i` decides whether row `i`
//! behaves like the constraint (`γ_i = 1`, derivative `-∇c_i`) or like the
//! multiplier (`γ_i = 0`, derivative `e_i`). With `C = diag(γ)` and
//! `D = diag(1 - γ)`:
//!
//! ```text
//!   ∂ₓF = [ ∇²L     ∇gᵀ   ∇cᵀ ]        ∂ₚF = [ ∇ₚ(∇L) ]
//!         [ ∇g      0     0   ]              [ ∇ₚg    ]
//!         [ -C∇c    0     D̂   ]              [ -C∇ₚc  ]
//! ```
//!
//! where `D̂ = D + δI` is the regularized diagonal block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nlp::{check_len, check_shape, finite_mat, Dims, ParameterizedNlp, PrimalDual};

/// Selection `γ ∈ [0, 1]^q` for the min NCP rows. This implementation only
/// produces `0` or `1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaVector(pub DVector<f64>);

impl GammaVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Diagonal of `C = diag(γ)`.
    pub fn c_diag(&self) -> &DVector<f64> {
        &self.0
    }

    /// Diagonal of `D = diag(1 - γ)`.
    pub fn d_diag(&self) -> DVector<f64> {
        self.0.map(|g| 1.0 - g)
    }

    /// Number of rows treated as active (`γ_i = 1`).
    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&g| g == 1.0).count()
    }
}

/// `γ_i = 1` when `v_i >= -c_i` (ties count as active), else `0`.
pub fn gamma_select(cvals: &DVector<f64>, v: &DVector<f64>) -> Result<GammaVector> {
    check_len("gamma_select v", cvals.len(), v.len())?;
    if cvals.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            block: "gamma_select",
        });
    }
    Ok(GammaVector(DVector::from_iterator(
        cvals.len(),
        cvals
            .iter()
            .zip(v.iter())
            .map(|(c, vi)| if *vi >= -c { 1.0 } else { 0.0 }),
    )))
}

/// Evaluates `c(z, p)` and selects `γ` at `(x, p)`.
pub fn gamma_at<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
) -> Result<GammaVector> {
    gamma_select(&nlp.c(&x.z, p), &x.v)
}

/// Block form of a (regularized) element of `∂ₓF`.
#[derive(Clone, Debug)]
pub struct JacobianX {
    /// Symmetrized `∇²_z L`, `n x n`.
    pub hessian: DMatrix<f64>,
    /// `∇_z g`, `m x n`.
    pub jac_g: DMatrix<f64>,
    /// `∇_z c`, `q x n`.
    pub jac_c: DMatrix<f64>,
    pub gamma: GammaVector,
    /// Diagonal of `D̂ = diag(1 - γ) + δI`.
    pub d_hat: DVector<f64>,
    pub delta: f64,
}

impl JacobianX {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.hessian.nrows(), self.jac_g.nrows(), self.jac_c.nrows())
    }

    /// `-C ∇_z c`, the lower-left block.
    pub fn complementarity_block(&self) -> DMatrix<f64> {
        let mut out = self.jac_c.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= -self.gamma.0[i];
        }
        out
    }

    /// Assembles the dense `(n+m+q) x (n+m+q)` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, m, q) = self.dims();
        let size = n + m + q;
        let mut a = DMatrix::zeros(size, size);
        a.view_mut((0, 0), (n, n)).copy_from(&self.hessian);
        a.view_mut((0, n), (n, m)).copy_from(&self.jac_g.transpose());
        a.view_mut((0, n + m), (n, q))
            .copy_from(&self.jac_c.transpose());
        a.view_mut((n, 0), (m, n)).copy_from(&self.jac_g);
        a.view_mut((n + m, 0), (q, n))
            .copy_from(&self.complementarity_block());
        for i in 0..q {
            a[(n + m + i, n + m + i)] = self.d_hat[i];
        }
        a
    }
}

/// Stacked `[∇ₚ(∇_z L); ∇ₚg; -C∇ₚc]`, `(n+m+q) x l`.
#[derive(Clone, Debug)]
pub struct JacobianP(pub DMatrix<f64>);

/// Assembles the regularized element of `∂ₓF(x, p)` for selection `gamma`.
pub fn jac_x<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    gamma: &GammaVector,
    delta: f64,
) -> Result<JacobianX> {
    let dims = nlp.dims();
    check_inputs(dims, x, p, gamma)?;
    if !(delta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "regularization must be nonnegative, got {delta}"
        )));
    }
    let h = finite_mat(
        "hess_lagrangian",
        nlp.hess_lagrangian(&x.z, &x.lambda, &x.v, p),
    )?;
    check_shape("hess_lagrangian", (dims.n, dims.n), h.shape())?;
    let hessian = (&h + h.transpose()) * 0.5;
    let jac_g = finite_mat("jac_g", nlp.jac_g(&x.z, p))?;
    check_shape("jac_g", (dims.m, dims.n), jac_g.shape())?;
    let jac_c = finite_mat("jac_c", nlp.jac_c(&x.z, p))?;
    check_shape("jac_c", (dims.q, dims.n), jac_c.shape())?;
    let d_hat = gamma.d_diag().add_scalar(delta);
    Ok(JacobianX {
        hessian,
        jac_g,
        jac_c,
        gamma: gamma.clone(),
        d_hat,
        delta,
    })
}

/// Assembles the element of `∂ₚF(x, p)` sharing `gamma` with the paired
/// [`jac_x`].
pub fn jac_p<P: ParameterizedNlp + ?Sized>(
    nlp: &P,
    x: &PrimalDual,
    p: &DVector<f64>,
    gamma: &GammaVector,
) -> Result<JacobianP> {
    let dims = nlp.dims();
    check_inputs(dims, x, p, gamma)?;
    let (n, m, q, l) = (dims.n, dims.m, dims.q, dims.l);
    let lpz = finite_mat(
        "jac_pz_lagrangian",
        nlp.jac_pz_lagrangian(&x.z, &x.lambda, &x.v, p),
    )?;
    check_shape("jac_pz_lagrangian", (n, l), lpz.shape())?;
    let gp = finite_mat("jac_p_g", nlp.jac_p_g(&x.z, p))?;
    check_shape("jac_p_g", (m, l), gp.shape())?;
    let cp = finite_mat("jac_p_c", nlp.jac_p_c(&x.z, p))?;
    check_shape("jac_p_c", (q, l), cp.shape())?;

    let mut out = DMatrix::zeros(n + m + q, l);
    out.view_mut((0, 0), (n, l)).copy_from(&lpz);
    out.view_mut((n, 0), (m, l)).copy_from(&gp);
    for i in 0..q {
        let gi = gamma.0[i];
        for j in 0..l {
            out[(n + m + i, j)] = -gi * cp[(i, j)];
        }
    }
    Ok(JacobianP(out))
}

fn check_inputs(dims: Dims, x: &PrimalDual, p: &DVector<f64>, gamma: &GammaVector) -> Result<()> {
    x.check_dims(dims)?;
    check_len("parameter", dims.l, p.len())?;
    check_len("gamma", dims.q, gamma.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::problems::CircleProjection;
    use crate::verification::qp::QpSpec;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    #[test]
    fn gamma_rule_branches() {
        // -c = 1 < v = 2
        assert_eq!(gamma_select(&dvector![-1.0], &dvector![2.0]).unwrap().0[0], 1.0);
        // -c = 3 > v = 0
        assert_eq!(gamma_select(&dvector![-3.0], &dvector![0.0]).unwrap().0[0], 0.0);
        // tie
        assert_eq!(gamma_select(&dvector![-1.0], &dvector![1.0]).unwrap().0[0], 1.0);
    }

    #[test]
    fn gamma_rejects_non_finite() {
        assert!(matches!(
            gamma_select(&dvector![f64::NAN], &dvector![0.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn unconstrained_quadratic_jacobian_is_hessian() {
        let h = dmatrix![2.0, 0.5; 0.5, 3.0];
        let qp = QpSpec::unconstrained(h.clone());
        let x = PrimalDual::new(dvector![0.3, -2.0], dvector![], dvector![]);
        let gamma = GammaVector(DVector::zeros(0));
        let j = jac_x(&qp, &x, &dvector![1.0, 4.0], &gamma, 0.0).unwrap();
        assert_eq!(j.to_dense(), h);
    }

    #[test]
    fn scalar_bound_inactive_assembly() {
        let qp = QpSpec::scalar_bound();
        let x = PrimalDual::new(dvector![-1.0], dvector![], dvector![0.0]);
        let p = dvector![-1.0];
        let gamma = gamma_at(&qp, &x, &p).unwrap();
        assert_eq!(gamma.0[0], 0.0);
        let j = jac_x(&qp, &x, &p, &gamma, 0.0).unwrap();
        assert_eq!(j.to_dense(), dmatrix![1.0, 1.0; 0.0, 1.0]);
        let j = jac_x(&qp, &x, &p, &gamma, 1e-6).unwrap();
        assert_eq!(j.to_dense()[(1, 1)], 1.0 + 1e-6);
    }

    #[test]
    fn parameter_jacobian_examples() {
        // min ½(z - p)²: ∇_pz L = -1.
        let qp = QpSpec::unconstrained(dmatrix![1.0]);
        let x = PrimalDual::new(dvector![0.7], dvector![], dvector![]);
        let jp = jac_p(&qp, &x, &dvector![0.1], &GammaVector(DVector::zeros(0))).unwrap();
        assert_eq!(jp.0, dmatrix![-1.0]);

        // p only in c = z - p, inactive: complementarity row vanishes.
        let qp = QpSpec::scalar_moving_bound();
        let p = dvector![1.0];
        let x = PrimalDual::new(dvector![0.0], dvector![], dvector![0.0]);
        let gamma = gamma_at(&qp, &x, &p).unwrap();
        assert_eq!(gamma.0[0], 0.0);
        assert_eq!(jac_p(&qp, &x, &p, &gamma).unwrap().0[(1, 0)], 0.0);

        // Active branch: -γ ∇_p c = -(1)(-1) = 1.
        let x = PrimalDual::new(dvector![1.0], dvector![], dvector![0.5]);
        let gamma = gamma_at(&qp, &x, &p).unwrap();
        assert_eq!(gamma.0[0], 1.0);
        assert_eq!(jac_p(&qp, &x, &p, &gamma).unwrap().0[(1, 0)], 1.0);
    }

    #[test]
    fn hessian_block_is_symmetrized() {
        struct Skewed;
        impl ParameterizedNlp for Skewed {
            fn dims(&self) -> Dims {
                CircleProjection.dims()
            }
            fn f(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
                CircleProjection.f(z, p)
            }
            fn grad_f(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
                CircleProjection.grad_f(z, p)
            }
            fn g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
                CircleProjection.g(z, p)
            }
            fn jac_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
                CircleProjection.jac_g(z, p)
            }
            fn c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
                CircleProjection.c(z, p)
            }
            fn jac_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
                CircleProjection.jac_c(z, p)
            }
            fn hess_lagrangian(
                &self,
                _z: &DVector<f64>,
                _l: &DVector<f64>,
                _v: &DVector<f64>,
                _p: &DVector<f64>,
            ) -> DMatrix<f64> {
                dmatrix![1.0, 2.0; 0.0, 1.0]
            }
            fn jac_pz_lagrangian(
                &self,
                z: &DVector<f64>,
                l: &DVector<f64>,
                v: &DVector<f64>,
                p: &DVector<f64>,
            ) -> DMatrix<f64> {
                CircleProjection.jac_pz_lagrangian(z, l, v, p)
            }
            fn jac_p_g(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
                CircleProjection.jac_p_g(z, p)
            }
            fn jac_p_c(&self, z: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
                CircleProjection.jac_p_c(z, p)
            }
        }
        let x = CircleProjection.solution(&dvector![1.0, 1.0]);
        let gamma = gamma_at(&Skewed, &x, &dvector![1.0, 1.0]).unwrap();
        let j = jac_x(&Skewed, &x, &dvector![1.0, 1.0], &gamma, 0.0).unwrap();
        assert_eq!(j.hessian, dmatrix![1.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn negative_delta_is_rejected() {
        let qp = QpSpec::scalar_bound();
        let x = PrimalDual::zeros(qp.dims());
        let gamma = gamma_at(&qp, &x, &dvector![0.0]).unwrap();
        assert!(jac_x(&qp, &x, &dvector![0.0], &gamma, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn c_plus_d_is_identity(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 0..20)) {
            let c = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.0));
            let v = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
            let gamma = gamma_select(&c, &v).unwrap();
            let sum = gamma.c_diag() + gamma.d_diag();
            prop_assert!(sum.iter().all(|&s| s == 1.0));
            prop_assert!(gamma.0.iter().all(|&g| g == 0.0 || g == 1.0));
        }

        #[test]
        fn regularized_diagonal_dominates_delta(
            pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..10),
            delta in 0.0f64..1e-2,
        ) {
            let q = pairs.len();
            let qp = QpSpec {
                a_in: DMatrix::from_element(q, 1, 1.0),
                b_in0: DVector::from_iterator(q, pairs.iter().map(|p| p.0)),
                b_in_p: DMatrix::zeros(q, 1),
                ..QpSpec::scalar_bound()
            };
            let x = PrimalDual::new(dvector![0.0], dvector![], DVector::from_iterator(q, pairs.iter().map(|p| p.1)));
            let p = dvector![0.0];
            let gamma = gamma_at(&qp, &x, &p).unwrap();
            let j = jac_x(&qp, &x, &p, &gamma, delta).unwrap();
            prop_assert!(j.d_hat.iter().all(|&d| d >= delta));
            prop_assert_eq!(j.to_dense().shape(), (1 + q, 1 + q));
        }
    }
}
