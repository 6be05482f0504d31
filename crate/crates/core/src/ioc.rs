//! Hard-constrained minimum-principle inverse optimal control.
//!
//! With the costate written as `p(t) = L(t) c`, the costate equation becomes the
//! weight-independent matrix ODE
//!
//! ```text
//! L̇ = −∇ₓφᵀ − ∇ₓfᵀ L,    L(t_f) = 0
//! ```
//!
//! and the stationarity condition `∇ᵤφᵀ c + ∇ᵤfᵀ p = 0` turns into `W₁(t) c = 0`
//! with `W₁ = ∇ᵤφᵀ + ∇ᵤfᵀ L`. Weights are recovered by minimizing
//! `cᵀ W c`, `W = ∫ W₁ᵀ W₁ dt`, with some entries of `c` fixed.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, OMatrix, SMatrix, U9, Vector6};

use crate::dynamics::{grad_u_f_t, grad_u_phi_t, grad_x_f_t, grad_x_phi_t_from_error, ControlBasisGrad, StateBasisGrad};
use crate::error::{Error, Result};
use crate::model::{KnownWeights, SampledTrajectory, Vector9, WeightVector, BASIS_DIM};

pub type Matrix9 = SMatrix<f64, BASIS_DIM, BASIS_DIM>;
pub type SelectionMatrix = OMatrix<f64, U9, Dyn>;

/// Relative singular-value floor separating full rank from rank deficiency.
pub const RANK_TOL: f64 = 1e-12;
/// Relative symmetry tolerance accepted for a Gram matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative eigenvalue floor accepted for a Gram matrix.
pub const PSD_TOL: f64 = 1e-8;
/// Negative unknowns with magnitude below this fraction of the largest unknown
/// are clipped to zero when clipping is enabled.
pub const CLIP_TOL: f64 = 1e-6;

/// `L(t_k)` for every sample of a trajectory; `p(t_k) = L(t_k) c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostateBasisSeries {
    t0: f64,
    dt: f64,
    values: Vec<StateBasisGrad>,
}

impl CostateBasisSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> &StateBasisGrad {
        &self.values[k]
    }

    pub fn values(&self) -> &[StateBasisGrad] {
        &self.values
    }

    pub fn costate(&self, k: usize, c: &Vector9) -> Vector6<f64> {
        self.values[k] * c
    }

    /// Wraps externally computed values, e.g. for checking the Gram assembly in isolation.
    pub fn from_values(t0: f64, dt: f64, values: Vec<StateBasisGrad>) -> Self {
        CostateBasisSeries { t0, dt, values }
    }

    fn matches(&self, traj: &SampledTrajectory) -> bool {
        self.values.len() == traj.len()
            && (self.t0 - traj.t0()).abs() <= crate::model::GRID_TOL
            && (self.dt - traj.dt()).abs() <= crate::model::GRID_TOL
    }
}

/// Backward RK4 integration of the costate basis from `L(t_f) = 0`.
///
/// Between samples the tracking error is interpolated linearly.
pub fn integrate_costate_basis(
    traj: &SampledTrajectory,
    desired: &SampledTrajectory,
) -> Result<CostateBasisSeries> {
    traj.ensure_same_grid(desired)?;
    traj.ensure_finite("trajectory")?;
    desired.ensure_finite("desired trajectory")?;

    let n = traj.len();
    let dt = traj.dt();
    let at = grad_x_f_t();
    let errors: Vec<Vector6<f64>> = (0..n).map(|k| desired.state(k).0 - traj.state(k).0).collect();
    let rhs = |e: &Vector6<f64>, l: &StateBasisGrad| -grad_x_phi_t_from_error(e) - at * l;

    let mut values = alloc::vec![StateBasisGrad::zeros(); n];
    let mut l = StateBasisGrad::zeros();
    for k in (0..n - 1).rev() {
        let e_hi = &errors[k + 1];
        let e_mid = (errors[k] + errors[k + 1]) * 0.5;
        let e_lo = &errors[k];
        let k1 = rhs(e_hi, &l);
        let k2 = rhs(&e_mid, &(l - k1 * (dt / 2.0)));
        let k3 = rhs(&e_mid, &(l - k2 * (dt / 2.0)));
        let k4 = rhs(e_lo, &(l - k3 * dt));
        l -= (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        values[k] = l;
    }
    Ok(CostateBasisSeries { t0: traj.t0(), dt, values })
}

/// `W = ∫ W₁ᵀ W₁ dt` accumulated over one or more flights.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub w: Matrix9,
    pub flight_count: usize,
}

impl GramMatrix {
    pub fn new(w: Matrix9) -> Self {
        GramMatrix { w, flight_count: 1 }
    }

    pub fn zeros() -> Self {
        GramMatrix { w: Matrix9::zeros(), flight_count: 0 }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        GramMatrix { w: self.w * alpha, flight_count: self.flight_count }
    }

    pub fn asymmetry(&self) -> f64 {
        (self.w - self.w.transpose()).amax()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (self.w + self.w.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&singular_values(&DMatrix::from_column_slice(BASIS_DIM, BASIS_DIM, self.w.as_slice())))
    }

    /// Fails if the matrix is not symmetric positive semidefinite within tolerance.
    pub fn ensure_valid(&self) -> Result<()> {
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gram matrix"));
        }
        let asym = self.asymmetry();
        if asym > SYMMETRY_TOL * self.w.amax() {
            return Err(Error::AsymmetricGram { asymmetry: asym });
        }
        let ev = self.eigenvalues();
        let (min, max) = (ev[0], ev[ev.len() - 1]);
        if min < -PSD_TOL * max.max(0.0) {
            return Err(Error::IndefiniteGram { min_eigenvalue: min, max_eigenvalue: max });
        }
        Ok(())
    }
}

/// `W₁(t_k) = ∇ᵤφᵀ + ∇ᵤfᵀ L(t_k)`, a 3×9 matrix.
pub fn stationarity_matrix(traj: &SampledTrajectory, basis: &CostateBasisSeries, k: usize) -> ControlBasisGrad {
    grad_u_phi_t(traj.control(k)) + grad_u_f_t() * basis.get(k)
}

/// Trapezoidal quadrature of `W₁ᵀ W₁` over one flight.
pub fn assemble_gram_single(
    traj: &SampledTrajectory,
    desired: &SampledTrajectory,
    basis: &CostateBasisSeries,
) -> Result<GramMatrix> {
    traj.ensure_same_grid(desired)?;
    if !basis.matches(traj) {
        return Err(Error::GridMismatch("costate basis is not on the trajectory grid".into()));
    }
    let n = traj.len();
    let mut w = Matrix9::zeros();
    for k in 0..n {
        let weight = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        let w1 = stationarity_matrix(traj, basis, k);
        w += w1.transpose() * w1 * weight;
    }
    w *= traj.dt();
    w = (w + w.transpose()) * 0.5;
    Ok(GramMatrix { w, flight_count: 1 })
}

/// Costate integration and Gram assembly for one flight.
pub fn gram_for_flight(traj: &SampledTrajectory, desired: &SampledTrajectory) -> Result<GramMatrix> {
    let basis = integrate_costate_basis(traj, desired)?;
    assemble_gram_single(traj, desired, &basis)
}

/// Sum of per-flight Gram matrices, in list order. Equivalent to integrating the
/// stacked multi-flight stationarity matrix.
pub fn assemble_gram_multi<'a, I>(flights: I) -> Result<GramMatrix>
where
    I: IntoIterator<Item = (&'a SampledTrajectory, &'a SampledTrajectory)>,
{
    let mut total = GramMatrix::zeros();
    for (index, (traj, desired)) in flights.into_iter().enumerate() {
        let g = gram_for_flight(traj, desired).map_err(|e| e.for_flight(index))?;
        total = sum_grams(&total, &g);
    }
    if total.flight_count == 0 {
        return Err(Error::InvalidTrajectory("no flights given".into()));
    }
    Ok(total)
}

/// Adds already assembled Gram matrices.
pub fn sum_grams(a: &GramMatrix, b: &GramMatrix) -> GramMatrix {
    GramMatrix { w: a.w + b.w, flight_count: a.flight_count + b.flight_count }
}

/// Columns of the identity for the unknown entries: a basis of `ker(diag(c̄))`
/// where `c̄` is supported on the known entries.
pub fn selection_matrix(known: &KnownWeights) -> SelectionMatrix {
    let unknown = known.unknown_indices();
    let mut n = SelectionMatrix::zeros(unknown.len());
    for (col, &i) in unknown.iter().enumerate() {
        n[(i, col)] = 1.0;
    }
    n
}

/// Selection matrix for a single known entry (zero-based index).
pub fn build_selection(known_index: usize) -> Result<SMatrix<f64, BASIS_DIM, { BASIS_DIM - 1 }>> {
    if known_index >= BASIS_DIM {
        return Err(Error::IndexOutOfRange { index: known_index, dim: BASIS_DIM });
    }
    let mut n = SMatrix::<f64, BASIS_DIM, { BASIS_DIM - 1 }>::zeros();
    for (col, i) in (0..BASIS_DIM).filter(|&i| i != known_index).enumerate() {
        n[(i, col)] = 1.0;
    }
    Ok(n)
}

fn reduced(w: &GramMatrix, n: &SelectionMatrix) -> DMatrix<f64> {
    let m = n.transpose() * w.w * n;
    (&m + m.transpose()) * 0.5
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn numerical_rank(spectrum: &[f64]) -> usize {
    let max = spectrum.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    spectrum.iter().filter(|&&s| s > RANK_TOL * max).count()
}

fn condition_number(spectrum: &[f64]) -> f64 {
    match (spectrum.first(), spectrum.last()) {
        (Some(&max), Some(&min)) if max > 0.0 && min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveOptions {
    /// Zero out slightly negative unknowns.
    pub clip_negatives: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IocSolution {
    pub c_hat: WeightVector,
    /// Condition number of the reduced Gram matrix `N_hᵀ W N_h`.
    pub r_w: f64,
    /// `ĉᵀ W ĉ`.
    pub residual: f64,
    /// Whether the reduced Gram matrix is numerically non-singular.
    pub unique: bool,
    /// Zero-based indices set to zero by clipping.
    pub negatives_clipped: Vec<usize>,
    /// Zero-based indices violating `Q ≥ 0`, `R > 0` in the recovered weights.
    pub sign_violations: Vec<usize>,
    pub flight_count: usize,
}

/// Minimizes `cᵀ W c` subject to the known entries of `c`.
///
/// A non-singular reduced Gram matrix is solved by Cholesky factorization. A
/// singular one yields the minimum-norm least-squares solution with
/// `unique == false`.
pub fn solve_weights(w: &GramMatrix, known: &KnownWeights, options: SolveOptions) -> Result<IocSolution> {
    w.ensure_valid()?;
    let n = selection_matrix(known);
    let pinned = known.pinned_vector();
    let m = reduced(w, &n);
    let rhs: DVector<f64> = -(n.transpose() * (w.w * pinned));

    let spectrum = singular_values(&m);
    let max = spectrum.first().copied().unwrap_or(0.0);
    let unique = numerical_rank(&spectrum) == spectrum.len();
    let r_w = condition_number(&spectrum);

    let solve_min_norm = |m: &DMatrix<f64>| -> DVector<f64> {
        if max <= 0.0 {
            return DVector::zeros(m.nrows());
        }
        m.clone()
            .svd(true, true)
            .solve(&rhs, RANK_TOL * max)
            .expect("singular vectors were computed")
    };
    let mut c_u = if unique {
        match Cholesky::new(m.clone()) {
            Some(chol) => chol.solve(&rhs),
            None => solve_min_norm(&m),
        }
    } else {
        solve_min_norm(&m)
    };

    let unknown = known.unknown_indices();
    let mut negatives_clipped = Vec::new();
    if options.clip_negatives {
        let eps = CLIP_TOL * c_u.amax();
        for (j, v) in c_u.iter_mut().enumerate() {
            if *v < 0.0 && *v > -eps {
                *v = 0.0;
                negatives_clipped.push(unknown[j]);
            }
        }
    }

    let mut values = [0.0; BASIS_DIM];
    for (j, &i) in unknown.iter().enumerate() {
        values[i] = c_u[j];
    }
    let c_hat = WeightVector::with_known(values, known.clone())?;
    let residual = (c_hat.values().transpose() * w.w * c_hat.values())[0];
    let sign_violations = c_hat.sign_violations();
    Ok(IocSolution {
        c_hat,
        r_w,
        residual,
        unique,
        negatives_clipped,
        sign_violations,
        flight_count: w.flight_count,
    })
}

/// Identifiability report for a Gram matrix under a given normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Singular values of `N_hᵀ W N_h`, descending.
    pub spectrum: Vec<f64>,
    pub r_w: f64,
    pub rank: usize,
    /// Unit directions in weight space (zero on the known entries) that the data
    /// cannot distinguish.
    pub null_space: Vec<Vector9>,
    pub unknown_indices: Vec<usize>,
}

impl Diagnostics {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.spectrum.len()
    }
}

pub fn diagnose(w: &GramMatrix, known: &KnownWeights) -> Diagnostics {
    let n = selection_matrix(known);
    let m = reduced(w, &n);
    let dim = m.nrows();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let spectrum: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = numerical_rank(&spectrum);
    let null_space = order[rank..]
        .iter()
        .map(|&i| {
            let dir = n.clone() * v_t.row(i).transpose();
            let mut v = Vector9::from_column_slice(dir.as_slice());
            // Sign convention: largest-magnitude entry positive.
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v = -v;
            }
            v
        })
        .collect();
    Diagnostics { r_w: condition_number(&spectrum), spectrum, rank, null_space, unknown_indices: known.unknown_indices() }
}
