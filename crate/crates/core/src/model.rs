//! Value types shared by every stage: states, controls, sampled trajectories
//! and the nine-element cost weight vector.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::{SVector, Vector3, Vector6};

use crate::error::{Error, Result};

pub const STATE_DIM: usize = 6;
pub const CONTROL_DIM: usize = 3;
/// Number of cost basis functions: six squared tracking errors, three squared controls.
pub const BASIS_DIM: usize = 9;

/// Tolerance used when checking that two sample grids coincide.
pub const GRID_TOL: f64 = 1e-9;

pub type Vector9 = SVector<f64, BASIS_DIM>;

/// Follower state ordered `[x, y, z, vx, vy, vz]` (meters, meters/second).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StateVec(pub Vector6<f64>);

impl StateVec {
    pub fn new(position: [f64; 3], velocity: [f64; 3]) -> Self {
        let [x, y, z] = position;
        let [vx, vy, vz] = velocity;
        StateVec(Vector6::new(x, y, z, vx, vy, vz))
    }

    pub fn zeros() -> Self {
        StateVec(Vector6::zeros())
    }

    pub fn from_vector(v: Vector6<f64>) -> Self {
        StateVec(v)
    }

    pub fn as_vector(&self) -> &Vector6<f64> {
        &self.0
    }

    pub fn position(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Follower control (acceleration) ordered `[ax, ay, az]` (meters/second²).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ControlVec(pub Vector3<f64>);

impl ControlVec {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        ControlVec(Vector3::new(ax, ay, az))
    }

    pub fn zeros() -> Self {
        ControlVec(Vector3::zeros())
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Uniformly sampled states and controls of one agent on one flight.
///
/// Sample `k` sits at `t0 + k * dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTrajectory {
    t0: f64,
    dt: f64,
    states: Vec<StateVec>,
    controls: Vec<ControlVec>,
}

impl SampledTrajectory {
    pub fn new(t0: f64, dt: f64, states: Vec<StateVec>, controls: Vec<ControlVec>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidTrajectory(alloc::format!(
                "sample period must be positive and finite (t0={t0}, dt={dt})"
            )));
        }
        if states.len() != controls.len() {
            return Err(Error::InvalidTrajectory(alloc::format!(
                "{} states but {} controls",
                states.len(),
                controls.len()
            )));
        }
        if states.len() < 2 {
            return Err(Error::TooShort { len: states.len(), min: 2 });
        }
        Ok(SampledTrajectory { t0, dt, states, controls })
    }

    /// Trajectory that sits at `state` with zero control for `len` samples.
    pub fn constant(t0: f64, dt: f64, len: usize, state: StateVec) -> Result<Self> {
        Self::new(t0, dt, alloc::vec![state; len], alloc::vec![ControlVec::zeros(); len])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn controls(&self) -> &[ControlVec] {
        &self.controls
    }

    pub fn state(&self, k: usize) -> &StateVec {
        &self.states[k]
    }

    pub fn control(&self, k: usize) -> &ControlVec {
        &self.controls[k]
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(StateVec::is_finite) && self.controls.iter().all(ControlVec::is_finite)
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn same_grid(&self, other: &SampledTrajectory) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= GRID_TOL
            && (self.dt - other.dt).abs() <= GRID_TOL
    }

    pub fn ensure_same_grid(&self, other: &SampledTrajectory) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(alloc::format!(
                "(t0={}, dt={}, n={}) vs (t0={}, dt={}, n={})",
                self.t0,
                self.dt,
                self.len(),
                other.t0,
                other.dt,
                other.len()
            )))
        }
    }

    /// Samples `start..end` as a new trajectory on the shifted grid.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let end = end.min(self.len());
        if start >= end {
            return Err(Error::TooShort { len: 0, min: 2 });
        }
        Self::new(
            self.time(start),
            self.dt,
            self.states[start..end].to_vec(),
            self.controls[start..end].to_vec(),
        )
    }

    pub fn into_parts(self) -> (f64, f64, Vec<StateVec>, Vec<ControlVec>) {
        (self.t0, self.dt, self.states, self.controls)
    }
}

/// Set of cost weights whose values are known a priori.
///
/// Indices are zero-based positions in the basis vector. At least one entry must
/// stay unknown and every known value must be non-zero.
#[derive(Clone, Debug, PartialEq)]
pub struct KnownWeights {
    entries: Vec<(usize, f64)>,
}

impl KnownWeights {
    pub fn single(index: usize, value: f64) -> Result<Self> {
        Self::new([(index, value)])
    }

    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().collect();
        entries.sort_by_key(|&(i, _)| i);
        if entries.is_empty() {
            return Err(Error::InvalidWeights("at least one known weight is required".into()));
        }
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidWeights(alloc::format!("index {} pinned twice", w[0].0)));
            }
        }
        for &(index, value) in &entries {
            if index >= BASIS_DIM {
                return Err(Error::IndexOutOfRange { index, dim: BASIS_DIM });
            }
            if value == 0.0 {
                return Err(Error::ZeroKnownValue);
            }
            if !value.is_finite() {
                return Err(Error::NonFinite("known weight value"));
            }
        }
        if entries.len() >= BASIS_DIM {
            return Err(Error::InvalidWeights("every weight is pinned, nothing to recover".into()));
        }
        Ok(KnownWeights { entries })
    }

    /// The normalization used throughout: `c_9` (the z control weight) equal to one.
    pub fn default_normalization() -> Self {
        KnownWeights { entries: alloc::vec![(BASIS_DIM - 1, 1.0)] }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn is_known(&self, index: usize) -> bool {
        self.entries.iter().any(|&(i, _)| i == index)
    }

    pub fn unknown_indices(&self) -> Vec<usize> {
        (0..BASIS_DIM).filter(|&i| !self.is_known(i)).collect()
    }

    /// Vector with the known values at their indices and zeros elsewhere.
    pub fn pinned_vector(&self) -> Vector9 {
        let mut v = Vector9::zeros();
        for &(i, value) in &self.entries {
            v[i] = value;
        }
        v
    }
}

impl Default for KnownWeights {
    fn default() -> Self {
        Self::default_normalization()
    }
}

/// Cost weights `c = [q_x, q_y, q_z, q_vx, q_vy, q_vz, r_x, r_y, r_z]` with their
/// normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    values: Vector9,
    known: KnownWeights,
}

impl WeightVector {
    /// Weights pinned at the default normalization index, taking the pinned
    /// value from `values` itself.
    pub fn new(values: [f64; BASIS_DIM]) -> Result<Self> {
        let last = BASIS_DIM - 1;
        Self::with_known(values, KnownWeights::single(last, values[last])?)
    }

    /// Weights with an explicit normalization. Known entries overwrite `values`.
    pub fn with_known(values: [f64; BASIS_DIM], known: KnownWeights) -> Result<Self> {
        let mut values = Vector9::from(values);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight vector"));
        }
        for &(i, v) in known.entries() {
            values[i] = v;
        }
        Ok(WeightVector { values, known })
    }

    pub fn values(&self) -> &Vector9 {
        &self.values
    }

    pub fn to_array(&self) -> [f64; BASIS_DIM] {
        self.values.into()
    }

    pub fn known(&self) -> &KnownWeights {
        &self.known
    }

    pub fn q_diag(&self) -> Vector6<f64> {
        self.values.fixed_rows::<6>(0).into_owned()
    }

    pub fn r_diag(&self) -> Vector3<f64> {
        self.values.fixed_rows::<3>(6).into_owned()
    }

    /// Indices whose sign violates `Q >= 0` or `R > 0`.
    pub fn sign_violations(&self) -> Vec<usize> {
        (0..BASIS_DIM)
            .filter(|&i| if i < STATE_DIM { self.values[i] < 0.0 } else { self.values[i] <= 0.0 })
            .collect()
    }

    /// Checks the weights define a well-posed tracking problem.
    pub fn ensure_forward_valid(&self) -> Result<()> {
        if let Some(i) = self.sign_violations().first() {
            let which = if *i < STATE_DIM { "Q entries must be >= 0" } else { "R entries must be > 0" };
            return Err(Error::InvalidWeights(alloc::format!(
                "c[{}] = {}: {which}",
                i + 1,
                self.values[*i]
            )));
        }
        Ok(())
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

/// Linear interpolation between grid samples, clamped to the grid ends.
pub(crate) fn interp_index(len: usize, t0: f64, dt: f64, t: f64) -> (usize, f64) {
    let s = (t - t0) / dt;
    if s <= 0.0 {
        return (0, 0.0);
    }
    let last = len - 1;
    if s >= last as f64 {
        return (last - 1, 1.0);
    }
    let k = libm::floor(s) as usize;
    let k = k.min(last - 1);
    (k, s - k as f64)
}
