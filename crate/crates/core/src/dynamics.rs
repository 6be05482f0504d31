//! Double-integrator follower model, cost basis and their gradients.
//!
//! Gradients of the basis are stored as `∇φᵀ` with one row per differentiation
//! variable and one column per basis function, so `∇ₓφᵀ` is 6×9 and `∇ᵤφᵀ` is
//! 3×9. This is the layout in which they enter the costate and stationarity
//! equations.

use nalgebra::{Matrix3x6, Matrix6, Matrix6x3, SMatrix, Vector6};

use crate::model::{ControlVec, StateVec, Vector9, WeightVector, BASIS_DIM, CONTROL_DIM, STATE_DIM};

pub type StateBasisGrad = SMatrix<f64, STATE_DIM, BASIS_DIM>;
pub type ControlBasisGrad = SMatrix<f64, CONTROL_DIM, BASIS_DIM>;

/// `ẋ = A x + B u` with positions integrating velocities and velocities integrating
/// accelerations, independently per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDynamics {
    pub a: Matrix6<f64>,
    pub b: Matrix6x3<f64>,
}

impl LinearDynamics {
    pub fn double_integrator() -> Self {
        let mut a = Matrix6::zeros();
        a.fixed_view_mut::<3, 3>(0, 3).fill_with_identity();
        let mut b = Matrix6x3::zeros();
        b.fixed_view_mut::<3, 3>(3, 0).fill_with_identity();
        LinearDynamics { a, b }
    }

    /// Rank of `[B, AB, ..., A⁵B]`.
    pub fn controllability_rank(&self) -> usize {
        let mut ctrb = SMatrix::<f64, STATE_DIM, { STATE_DIM * CONTROL_DIM }>::zeros();
        let mut block = self.b;
        for i in 0..STATE_DIM {
            ctrb.fixed_view_mut::<STATE_DIM, CONTROL_DIM>(0, i * CONTROL_DIM).copy_from(&block);
            block = self.a * block;
        }
        ctrb.rank(1e-12)
    }
}

impl Default for LinearDynamics {
    fn default() -> Self {
        Self::double_integrator()
    }
}

/// State derivative `[vx, vy, vz, ax, ay, az]`.
pub fn eval_f(x: &StateVec, u: &ControlVec) -> Vector6<f64> {
    let mut d = Vector6::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&x.velocity());
    d.fixed_rows_mut::<3>(3).copy_from(u.as_vector());
    d
}

/// Squared tracking errors followed by squared controls.
pub fn basis_phi(x: &StateVec, x_des: &StateVec, u: &ControlVec) -> Vector9 {
    let mut phi = Vector9::zeros();
    for k in 0..STATE_DIM {
        let e = x_des.0[k] - x.0[k];
        phi[k] = e * e;
    }
    for m in 0..CONTROL_DIM {
        phi[STATE_DIM + m] = u.0[m] * u.0[m];
    }
    phi
}

/// `∂φ_k/∂x_m`: diagonal `-2 (x_des - x)` in the first six columns.
pub fn grad_x_phi_t(x: &StateVec, x_des: &StateVec) -> StateBasisGrad {
    grad_x_phi_t_from_error(&(x_des.0 - x.0))
}

/// Same as [`grad_x_phi_t`] given the tracking error `x_des - x` directly.
pub fn grad_x_phi_t_from_error(error: &Vector6<f64>) -> StateBasisGrad {
    let mut g = StateBasisGrad::zeros();
    for k in 0..STATE_DIM {
        g[(k, k)] = -2.0 * error[k];
    }
    g
}

/// `∂φ_{6+m}/∂u_m = 2 u_m`, zero elsewhere.
pub fn grad_u_phi_t(u: &ControlVec) -> ControlBasisGrad {
    let mut g = ControlBasisGrad::zeros();
    for m in 0..CONTROL_DIM {
        g[(m, STATE_DIM + m)] = 2.0 * u.0[m];
    }
    g
}

pub fn grad_x_f_t() -> Matrix6<f64> {
    LinearDynamics::double_integrator().a.transpose()
}

pub fn grad_u_f_t() -> Matrix3x6<f64> {
    LinearDynamics::double_integrator().b.transpose()
}

/// Running cost `cᵀ φ(x, x_des, u)`.
pub fn running_cost(c: &WeightVector, x: &StateVec, x_des: &StateVec, u: &ControlVec) -> f64 {
    c.values().dot(&basis_phi(x, x_des, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    #[test]
    fn eval_f_examples() {
        let x = StateVec::new([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]);
        let u = ControlVec::new(0.1, 0.2, 0.3);
        assert_eq!(eval_f(&x, &u).as_slice(), &[1.0, 2.0, 3.0, 0.1, 0.2, 0.3]);
        assert_eq!(eval_f(&StateVec::zeros(), &ControlVec::zeros()), Vector6::zeros());
        let x = StateVec::new([5.0, -1.0, 2.0], [0.0; 3]);
        let u = ControlVec::new(0.0, 0.0, -9.81);
        assert_eq!(eval_f(&x, &u).as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, -9.81]);
    }

    #[test]
    fn matrices_have_block_structure() {
        let d = LinearDynamics::double_integrator();
        let at = grad_x_f_t();
        assert_eq!(at.fixed_view::<3, 3>(3, 0), Matrix3::identity());
        assert_eq!(at * at, Matrix6::zeros());
        let bt = grad_u_f_t();
        assert_eq!(bt.fixed_view::<3, 3>(0, 0), Matrix3::zeros());
        assert_eq!(bt.fixed_view::<3, 3>(0, 3), Matrix3::identity());
        assert_eq!(d.controllability_rank(), 6);
    }

    #[test]
    fn basis_examples() {
        let x = StateVec::zeros();
        let xd = StateVec::new([1.0, 0.0, 0.0], [0.0; 3]);
        let phi = basis_phi(&x, &xd, &ControlVec::zeros());
        assert_eq!(phi.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let xd = StateVec::new([1.0, 2.0, 3.0], [0.5, 0.5, 0.5]);
        let phi = basis_phi(&x, &xd, &ControlVec::new(1.0, -1.0, 2.0));
        assert_eq!(phi.as_slice(), &[1.0, 4.0, 9.0, 0.25, 0.25, 0.25, 1.0, 1.0, 4.0]);

        assert_eq!(basis_phi(&xd, &xd, &ControlVec::zeros()), Vector9::zeros());
    }

    #[test]
    fn gradient_examples() {
        let x = StateVec::new([0.3; 3], [0.1; 3]);
        assert_eq!(grad_x_phi_t(&x, &x), StateBasisGrad::zeros());

        let xd = StateVec::new([1.0, 0.0, 0.0], [0.0; 3]);
        let g = grad_x_phi_t(&StateVec::zeros(), &xd);
        let mut expected = StateBasisGrad::zeros();
        expected[(0, 0)] = -2.0;
        assert_eq!(g, expected);

        assert_eq!(grad_u_phi_t(&ControlVec::zeros()), ControlBasisGrad::zeros());
        let g = grad_u_phi_t(&ControlVec::new(1.0, -1.0, 2.0));
        let mut expected = ControlBasisGrad::zeros();
        expected[(0, 6)] = 2.0;
        expected[(1, 7)] = -2.0;
        expected[(2, 8)] = 4.0;
        assert_eq!(g, expected);
    }

    // Central differences of basis_phi, independent of the analytic gradients.
    fn fd_grad_x(x: &StateVec, xd: &StateVec, u: &ControlVec, h: f64) -> StateBasisGrad {
        let mut g = StateBasisGrad::zeros();
        for m in 0..STATE_DIM {
            let (mut xp, mut xm) = (*x, *x);
            xp.0[m] += h;
            xm.0[m] -= h;
            let d = (basis_phi(&xp, xd, u) - basis_phi(&xm, xd, u)) / (2.0 * h);
            g.set_row(m, &d.transpose());
        }
        g
    }

    fn fd_grad_u(x: &StateVec, xd: &StateVec, u: &ControlVec, h: f64) -> ControlBasisGrad {
        let mut g = ControlBasisGrad::zeros();
        for m in 0..CONTROL_DIM {
            let (mut up, mut um) = (*u, *u);
            up.0[m] += h;
            um.0[m] -= h;
            let d = (basis_phi(x, xd, &up) - basis_phi(x, xd, &um)) / (2.0 * h);
            g.set_row(m, &d.transpose());
        }
        g
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = StateVec::zeros();
        let xd = StateVec::new([1.0, 2.0, 3.0], [0.5, 0.5, 0.5]);
        let u = ControlVec::new(0.3, -0.7, 1.1);
        let gx = grad_x_phi_t(&x, &xd);
        let gu = grad_u_phi_t(&u);
        assert_abs_diff_eq!(gx, fd_grad_x(&x, &xd, &u, 1e-5), epsilon = 1e-8);
        assert_abs_diff_eq!(gu, fd_grad_u(&x, &xd, &u, 1e-5), epsilon = 1e-8);
    }

    proptest::proptest! {
        #[test]
        fn cost_reconstruction(
            c in proptest::array::uniform9(0.0f64..10.0),
            x in proptest::array::uniform6(-10.0f64..10.0),
            xd in proptest::array::uniform6(-10.0f64..10.0),
            u in proptest::array::uniform3(-10.0f64..10.0),
        ) {
            let mut c = c;
            c[8] += 0.1;
            let w = WeightVector::new(c).unwrap();
            let x = StateVec(Vector6::from(x));
            let xd = StateVec(Vector6::from(xd));
            let u = ControlVec(nalgebra::Vector3::from(u));
            let e = xd.0 - x.0;
            let q = Matrix6::from_diagonal(&w.q_diag());
            let r = Matrix3::from_diagonal(&w.r_diag());
            let direct = (e.transpose() * q * e)[0] + (u.0.transpose() * r * u.0)[0];
            let via_basis = running_cost(&w, &x, &xd, &u);
            proptest::prop_assert!((direct - via_basis).abs() <= 1e-12 * direct.abs().max(1e-300));
        }

        #[test]
        fn gradient_consistency(
            x in proptest::array::uniform6(-10.0f64..10.0),
            xd in proptest::array::uniform6(-10.0f64..10.0),
            u in proptest::array::uniform3(-10.0f64..10.0),
        ) {
            let x = StateVec(Vector6::from(x));
            let xd = StateVec(Vector6::from(xd));
            let u = ControlVec(nalgebra::Vector3::from(u));
            let gx = grad_x_phi_t(&x, &xd);
            let fx = fd_grad_x(&x, &xd, &u, 1e-5);
            let gu = grad_u_phi_t(&u);
            let fu = fd_grad_u(&x, &xd, &u, 1e-5);
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            for (a, b) in gx.iter().zip(fx.iter()).chain(gu.iter().zip(fu.iter())) {
                proptest::prop_assert!(rel(*a, *b) <= 1e-6);
            }
        }
    }
}
