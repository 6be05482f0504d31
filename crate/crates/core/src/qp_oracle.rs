//! Brute-force reference for the tracking problem.
//!
//! All knot states and controls are stacked into one vector, the dynamics are
//! imposed through trapezoidal collocation defects, the cost is the trapezoidal
//! sum of the running cost, and the resulting equality-constrained QP is solved
//! through its KKT system. The unknowns are interleaved knot by knot
//! (`x_k, u_k, λ_k`) so the KKT matrix is banded.

use alloc::vec::Vec;

use nalgebra::{Matrix6, Matrix6x3};

use crate::banded::BandMatrix;
use crate::dynamics::LinearDynamics;
use crate::error::{Error, Result};
use crate::lqt::tracking_cost;
use crate::model::{ControlVec, SampledTrajectory, StateVec, WeightVector, CONTROL_DIM, STATE_DIM};

/// Upper bound on stacked states and controls.
pub const MAX_DECISION_VARS: usize = 50_000;

/// KKT pivot ratio above which the system is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e15;

const KNOT: usize = STATE_DIM + CONTROL_DIM;
const BLOCK: usize = KNOT + STATE_DIM;

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub trajectory: SampledTrajectory,
    /// Trapezoidal tracking cost of `trajectory`.
    pub objective: f64,
    /// Ratio of extreme pivots in the KKT factorization.
    pub pivot_ratio: f64,
}

pub fn direct_qp_oracle(c: &WeightVector, desired: &SampledTrajectory, x0: &StateVec) -> Result<QpSolution> {
    let n = desired.len();
    let vars = n * KNOT;
    if vars > MAX_DECISION_VARS {
        return Err(Error::TooLarge { vars, limit: MAX_DECISION_VARS });
    }
    desired.ensure_finite("desired trajectory")?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    c.ensure_forward_valid()?;

    let dt = desired.dt();
    let dyn_ = LinearDynamics::double_integrator();
    let q = c.q_diag();
    let r = c.r_diag();
    let half = dt / 2.0;
    // Defect x_k - x_{k-1} - dt/2 (A x_{k-1} + B u_{k-1} + A x_k + B u_k).
    let d_cur: Matrix6<f64> = Matrix6::identity() - dyn_.a * half;
    let d_prev: Matrix6<f64> = -(Matrix6::identity() + dyn_.a * half);
    let d_u: Matrix6x3<f64> = -dyn_.b * half;

    let dim = n * BLOCK;
    let band = 2 * BLOCK;
    let mut kkt = BandMatrix::zeros(dim, band, band);
    let mut rhs = alloc::vec![0.0; dim];
    let xi = |k: usize, i: usize| k * BLOCK + i;
    let ui = |k: usize, m: usize| k * BLOCK + STATE_DIM + m;
    let li = |k: usize, i: usize| k * BLOCK + KNOT + i;

    for k in 0..n {
        let w = if k == 0 || k + 1 == n { half } else { dt };
        let target = desired.state(k).0;
        for i in 0..STATE_DIM {
            kkt.add(xi(k, i), xi(k, i), 2.0 * w * q[i]);
            rhs[xi(k, i)] = 2.0 * w * q[i] * target[i];
        }
        for m in 0..CONTROL_DIM {
            kkt.add(ui(k, m), ui(k, m), 2.0 * w * r[m]);
        }

        if k == 0 {
            for i in 0..STATE_DIM {
                kkt.add(li(0, i), xi(0, i), 1.0);
                kkt.add(xi(0, i), li(0, i), 1.0);
                rhs[li(0, i)] = x0.0[i];
            }
            continue;
        }
        // Constraint rows λ_k and their transposes in the stationarity rows.
        for row in 0..STATE_DIM {
            for col in 0..STATE_DIM {
                let (cur, prev) = (d_cur[(row, col)], d_prev[(row, col)]);
                if cur != 0.0 {
                    kkt.add(li(k, row), xi(k, col), cur);
                    kkt.add(xi(k, col), li(k, row), cur);
                }
                if prev != 0.0 {
                    kkt.add(li(k, row), xi(k - 1, col), prev);
                    kkt.add(xi(k - 1, col), li(k, row), prev);
                }
            }
            for m in 0..CONTROL_DIM {
                let v = d_u[(row, m)];
                if v != 0.0 {
                    kkt.add(li(k, row), ui(k, m), v);
                    kkt.add(ui(k, m), li(k, row), v);
                    kkt.add(li(k, row), ui(k - 1, m), v);
                    kkt.add(ui(k - 1, m), li(k, row), v);
                }
            }
        }
    }

    let (z, stats) = kkt
        .solve(rhs)
        .map_err(|s| Error::SingularKkt { condition: s.ratio() })?;
    if stats.ratio() > SINGULAR_PIVOT_RATIO {
        return Err(Error::SingularKkt { condition: stats.ratio() });
    }

    let mut states = Vec::with_capacity(n);
    let mut controls = Vec::with_capacity(n);
    for k in 0..n {
        let mut s = StateVec::zeros();
        for i in 0..STATE_DIM {
            s.0[i] = z[xi(k, i)];
        }
        states.push(s);
        controls.push(ControlVec::new(z[ui(k, 0)], z[ui(k, 1)], z[ui(k, 2)]));
    }
    let trajectory = SampledTrajectory::new(desired.t0(), dt, states, controls)?;
    let objective = tracking_cost(c, &trajectory, desired)?;
    Ok(QpSolution { trajectory, objective, pivot_ratio: stats.ratio() })
}
