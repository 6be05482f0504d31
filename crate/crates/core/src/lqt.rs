//! Finite-horizon linear-quadratic tracking for a single follower.
//!
//! The cost `∫ (x_T − x)ᵀQ(x_T − x) + uᵀRu dt` over the desired trajectory's
//! horizon is minimized with a free final state. The optimal control is
//! `u = −R⁻¹Bᵀ(S x + s)` where
//!
//! ```text
//! −Ṡ = AᵀS + SA − SBR⁻¹BᵀS + Q,           S(t_f) = 0
//! −ṡ = (A − BR⁻¹BᵀS)ᵀ s − Q x_T(t),       s(t_f) = 0
//! ```
//!
//! Both sweeps and the forward rollout use fixed-step RK4. The sweeps run at
//! half the sample period so the rollout's midpoint stages find `S` and `s`
//! without interpolation.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix6, Vector6};

use crate::dynamics::LinearDynamics;
use crate::error::{Error, Result};
use crate::model::{interp_index, ControlVec, SampledTrajectory, StateVec, WeightVector};

/// Riccati matrix and feedforward vector on the half-step grid
/// `t0 + j dt / 2`, `j = 0..2(N−1)`.
#[derive(Clone, Debug)]
pub struct RiccatiSweep {
    t0: f64,
    dt: f64,
    len: usize,
    s_mat: Vec<Matrix6<f64>>,
    s_vec: Vec<Vector6<f64>>,
}

impl RiccatiSweep {
    /// Number of samples on the data grid.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `S(t_k)` on the data grid.
    pub fn riccati(&self, k: usize) -> &Matrix6<f64> {
        &self.s_mat[2 * k]
    }

    /// `s(t_k)` on the data grid.
    pub fn feedforward(&self, k: usize) -> &Vector6<f64> {
        &self.s_vec[2 * k]
    }

    fn half(&self, j: usize) -> (&Matrix6<f64>, &Vector6<f64>) {
        (&self.s_mat[j], &self.s_vec[j])
    }
}

struct Problem {
    dynamics: LinearDynamics,
    q: Matrix6<f64>,
    r_inv: Matrix3<f64>,
}

impl Problem {
    fn new(c: &WeightVector) -> Result<Self> {
        c.ensure_forward_valid()?;
        let r = c.r_diag();
        Ok(Problem {
            dynamics: LinearDynamics::double_integrator(),
            q: Matrix6::from_diagonal(&c.q_diag()),
            r_inv: Matrix3::from_diagonal(&r.map(|v| 1.0 / v)),
        })
    }

    fn gain_matrix(&self) -> Matrix6<f64> {
        let b = &self.dynamics.b;
        b * self.r_inv * b.transpose()
    }

    /// Time derivatives (forward time) of S and s.
    fn sweep_rhs(
        &self,
        brb: &Matrix6<f64>,
        s_mat: &Matrix6<f64>,
        s_vec: &Vector6<f64>,
        x_des: &Vector6<f64>,
    ) -> (Matrix6<f64>, Vector6<f64>) {
        let a = &self.dynamics.a;
        let ds = -(a.transpose() * s_mat + s_mat * a - s_mat * brb * s_mat + self.q);
        let closed = a - brb * s_mat;
        let dv = -(closed.transpose() * s_vec - self.q * x_des);
        (ds, dv)
    }

    fn control(&self, s_mat: &Matrix6<f64>, s_vec: &Vector6<f64>, x: &Vector6<f64>) -> ControlVec {
        ControlVec(-self.r_inv * self.dynamics.b.transpose() * (s_mat * x + s_vec))
    }
}

/// Desired state at an arbitrary time, linearly interpolated between samples.
fn desired_at(desired: &SampledTrajectory, t: f64) -> Vector6<f64> {
    let (k, a) = interp_index(desired.len(), desired.t0(), desired.dt(), t);
    let lo = desired.state(k).0;
    let hi = desired.state(k + 1).0;
    lo + (hi - lo) * a
}

fn validate_desired(desired: &SampledTrajectory) -> Result<()> {
    if desired.len() < 2 {
        return Err(Error::TooShort { len: desired.len(), min: 2 });
    }
    desired.ensure_finite("desired trajectory")
}

/// Backward sweep of the Riccati and feedforward equations for the tracking problem.
pub fn riccati_sweep(c: &WeightVector, desired: &SampledTrajectory) -> Result<RiccatiSweep> {
    validate_desired(desired)?;
    let problem = Problem::new(c)?;
    Ok(sweep(&problem, desired))
}

fn sweep(problem: &Problem, desired: &SampledTrajectory) -> RiccatiSweep {
    let n = desired.len();
    let steps = 2 * (n - 1);
    let h = desired.dt() / 2.0;
    let t0 = desired.t0();
    let brb = problem.gain_matrix();

    let mut s_mat = alloc::vec![Matrix6::zeros(); steps + 1];
    let mut s_vec = alloc::vec![Vector6::zeros(); steps + 1];
    let (mut sm, mut sv) = (Matrix6::zeros(), Vector6::zeros());
    for j in (0..steps).rev() {
        let t = t0 + (j + 1) as f64 * h;
        // Integrate backward in time: step of -h.
        let xd1 = desired_at(desired, t);
        let xd2 = desired_at(desired, t - h / 2.0);
        let xd3 = desired_at(desired, t - h);
        let (k1m, k1v) = problem.sweep_rhs(&brb, &sm, &sv, &xd1);
        let (k2m, k2v) = problem.sweep_rhs(&brb, &(sm - k1m * (h / 2.0)), &(sv - k1v * (h / 2.0)), &xd2);
        let (k3m, k3v) = problem.sweep_rhs(&brb, &(sm - k2m * (h / 2.0)), &(sv - k2v * (h / 2.0)), &xd2);
        let (k4m, k4v) = problem.sweep_rhs(&brb, &(sm - k3m * h), &(sv - k3v * h), &xd3);
        sm -= (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (h / 6.0);
        sv -= (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        sm = (sm + sm.transpose()) * 0.5;
        s_mat[j] = sm;
        s_vec[j] = sv;
    }
    RiccatiSweep { t0, dt: desired.dt(), len: n, s_mat, s_vec }
}

/// Optimal follower trajectory tracking `desired` from `x0`, on `desired`'s grid.
pub fn solve_tracking(
    c: &WeightVector,
    desired: &SampledTrajectory,
    x0: &StateVec,
) -> Result<SampledTrajectory> {
    validate_desired(desired)?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let problem = Problem::new(c)?;
    let sweep = sweep(&problem, desired);
    Ok(rollout(&problem, &sweep, x0))
}

fn rollout(problem: &Problem, sweep: &RiccatiSweep, x0: &StateVec) -> SampledTrajectory {
    let n = sweep.len();
    let dt = sweep.dt();
    let a = problem.dynamics.a;
    let b = problem.dynamics.b;
    let rhs = |j: usize, x: &Vector6<f64>| {
        let (sm, sv) = sweep.half(j);
        a * x + b * problem.control(sm, sv, x).0
    };

    let mut states = Vec::with_capacity(n);
    let mut controls = Vec::with_capacity(n);
    let mut x = x0.0;
    for k in 0..n {
        let (sm, sv) = sweep.half(2 * k);
        states.push(StateVec(x));
        controls.push(problem.control(sm, sv, &x));
        if k + 1 == n {
            break;
        }
        let k1 = rhs(2 * k, &x);
        let k2 = rhs(2 * k + 1, &(x + k1 * (dt / 2.0)));
        let k3 = rhs(2 * k + 1, &(x + k2 * (dt / 2.0)));
        let k4 = rhs(2 * k + 2, &(x + k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    SampledTrajectory::new(sweep.t0(), dt, states, controls)
        .expect("rollout preserves the desired grid")
}

/// Trapezoidal approximation of the tracking cost of `traj` against `desired`.
pub fn tracking_cost(c: &WeightVector, traj: &SampledTrajectory, desired: &SampledTrajectory) -> Result<f64> {
    traj.ensure_same_grid(desired)?;
    let n = traj.len();
    let mut total = 0.0;
    for k in 0..n {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        total += w * crate::dynamics::running_cost(c, traj.state(k), desired.state(k), traj.control(k));
    }
    Ok(total * traj.dt())
}
