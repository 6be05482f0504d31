//! From raw position tracks to aligned (follower, delayed leader) datasets.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::hierarchy::{delay_steps, FlockHierarchy};
use crate::model::{ControlVec, SampledTrajectory, StateVec};

/// Allowed deviation from a uniform sample spacing, seconds.
pub const UNIFORM_TOL: f64 = 1e-6;

/// Mean Earth radius used by the equirectangular projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Fewest samples [`differentiate`] accepts.
pub const MIN_DIFF_SAMPLES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub position: [f64; 3],
}

/// Time-stamped positions of one bird on one flight.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTrack {
    pub flight_id: String,
    pub pigeon_id: String,
    pub samples: Vec<TrackSample>,
}

impl RawTrack {
    pub fn new(flight_id: impl Into<String>, pigeon_id: impl Into<String>, samples: Vec<TrackSample>) -> Self {
        RawTrack { flight_id: flight_id.into(), pigeon_id: pigeon_id.into(), samples }
    }

    /// `(t0, dt)` of a uniformly sampled track.
    pub fn grid(&self) -> Result<(f64, f64)> {
        let s = &self.samples;
        if s.len() < 2 {
            return Err(Error::TooShort { len: s.len(), min: 2 });
        }
        let t0 = s[0].t;
        let dt = (s[s.len() - 1].t - t0) / (s.len() - 1) as f64;
        for (k, w) in s.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidTrajectory(alloc::format!(
                    "track {}/{}: timestamps not strictly increasing at sample {}",
                    self.flight_id,
                    self.pigeon_id,
                    k + 1
                )));
            }
        }
        for (k, sample) in s.iter().enumerate() {
            if (sample.t - (t0 + k as f64 * dt)).abs() > UNIFORM_TOL {
                return Err(Error::InvalidTrajectory(alloc::format!(
                    "track {}/{}: non-uniform sampling at t={}",
                    self.flight_id,
                    self.pigeon_id,
                    sample.t
                )));
            }
        }
        Ok((t0, dt))
    }
}

/// Geodetic coordinates (degrees, degrees, meters) to local meters around `origin`.
///
/// Equirectangular: `x` east, `y` north, `z` altitude above the origin.
pub fn project_equirectangular(lat: f64, lon: f64, alt: f64, origin: (f64, f64, f64)) -> [f64; 3] {
    let (lat0, lon0, alt0) = origin;
    let rad = core::f64::consts::PI / 180.0;
    let x = EARTH_RADIUS_M * (lon - lon0) * rad * libm::cos(lat0 * rad);
    let y = EARTH_RADIUS_M * (lat - lat0) * rad;
    [x, y, alt - alt0]
}

/// Linear-interpolation resampling onto `t0 + k dt` covering the track's span.
pub fn resample(track: &RawTrack, dt: f64) -> Result<RawTrack> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTrajectory(alloc::format!("resample period {dt} must be positive")));
    }
    let s = &track.samples;
    if s.len() < 2 {
        return Err(Error::TooShort { len: s.len(), min: 2 });
    }
    let t0 = s[0].t;
    let span = s[s.len() - 1].t - t0;
    let count = libm::floor(span / dt + 1e-9) as usize + 1;
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let t = t0 + k as f64 * dt;
        while j + 2 < s.len() && s[j + 1].t < t {
            j += 1;
        }
        let (a, b) = (&s[j], &s[j + 1]);
        if !(b.t > a.t) {
            return Err(Error::InvalidTrajectory(alloc::format!(
                "track {}/{}: timestamps not strictly increasing",
                track.flight_id,
                track.pigeon_id
            )));
        }
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let mut p = [0.0; 3];
        for i in 0..3 {
            p[i] = a.position[i] + (b.position[i] - a.position[i]) * w;
        }
        out.push(TrackSample { t, position: p });
    }
    Ok(RawTrack::new(track.flight_id.clone(), track.pigeon_id.clone(), out))
}

/// Centered moving average with a window that shrinks symmetrically at the ends.
fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let slice = &values[i - h..=i + h];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Central differences inside, second-order one-sided differences at the ends.
fn derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = alloc::vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt);
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * dt);
    }
    d
}

/// Velocities and accelerations from positions; accelerations become the controls.
///
/// `window` is the odd moving-average length applied to positions first (1 = off).
pub fn differentiate(track: &RawTrack, window: usize) -> Result<SampledTrajectory> {
    let n = track.samples.len();
    if n < MIN_DIFF_SAMPLES {
        return Err(Error::TooShort { len: n, min: MIN_DIFF_SAMPLES });
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidTrajectory(alloc::format!("smoothing window {window} must be odd")));
    }
    if window >= n {
        return Err(Error::InvalidTrajectory(alloc::format!(
            "smoothing window {window} not shorter than track ({n} samples)"
        )));
    }
    let (t0, dt) = track.grid()?;
    if track.samples.iter().any(|s| s.position.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("track positions"));
    }
    let mut pos = [Vec::new(), Vec::new(), Vec::new()];
    let mut vel = [Vec::new(), Vec::new(), Vec::new()];
    let mut acc = [Vec::new(), Vec::new(), Vec::new()];
    for axis in 0..3 {
        let raw: Vec<f64> = track.samples.iter().map(|s| s.position[axis]).collect();
        pos[axis] = if window > 1 { smooth(&raw, window) } else { raw };
        vel[axis] = derivative(&pos[axis], dt);
        acc[axis] = derivative(&vel[axis], dt);
    }
    let states = (0..n)
        .map(|k| StateVec::new([pos[0][k], pos[1][k], pos[2][k]], [vel[0][k], vel[1][k], vel[2][k]]))
        .collect();
    let controls = (0..n).map(|k| ControlVec::new(acc[0][k], acc[1][k], acc[2][k])).collect();
    SampledTrajectory::new(t0, dt, states, controls)
}

/// The leader's trajectory shifted later by `delay`, holding its first sample
/// until the shift catches up.
pub fn make_desired(leader: &SampledTrajectory, delay: f64) -> Result<SampledTrajectory> {
    if delay < 0.0 {
        return Err(Error::InvalidDelay { delay, dt: leader.dt(), reason: "negative" });
    }
    let k = delay_steps(delay, leader.dt()).ok_or(Error::InvalidDelay {
        delay,
        dt: leader.dt(),
        reason: "not a whole number of samples",
    })?;
    let n = leader.len();
    let src = |i: usize| i.saturating_sub(k);
    let states = (0..n).map(|i| *leader.state(src(i))).collect();
    let controls = (0..n).map(|i| *leader.control(src(i))).collect();
    SampledTrajectory::new(leader.t0(), leader.dt(), states, controls)
}

/// Tracking data for one follower on one flight.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDataset {
    pub follower_id: String,
    pub leader_id: String,
    pub flight_id: String,
    pub traj: SampledTrajectory,
    pub desired: SampledTrajectory,
    pub delay: f64,
}

impl PairDataset {
    /// Largest tracking error over the dataset (infinity norm).
    pub fn max_tracking_error(&self) -> f64 {
        self.traj
            .states()
            .iter()
            .zip(self.desired.states())
            .map(|(x, d)| (d.0 - x.0).amax())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    /// Moving-average window for positions (odd, 1 = off).
    pub smoothing: usize,
    /// Drop the first `delay / dt` samples, where the desired trajectory is padded.
    pub trim_warmup: bool,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { smoothing: 1, trim_warmup: false, t_start: None, t_end: None }
    }
}

fn index_offset(from: f64, to: f64, dt: f64) -> Option<isize> {
    let k = libm::round((to - from) / dt);
    if ((to - from) - k * dt).abs() <= UNIFORM_TOL {
        Some(k as isize)
    } else {
        None
    }
}

/// Builds one dataset per (flight, pair), in flight order then hierarchy order.
pub fn build_pair_datasets(
    tracks: &[RawTrack],
    hierarchy: &FlockHierarchy,
    flights: &[String],
    options: &PipelineOptions,
) -> Result<Vec<PairDataset>> {
    let index: BTreeMap<(&str, &str), &RawTrack> = tracks
        .iter()
        .map(|t| ((t.flight_id.as_str(), t.pigeon_id.as_str()), t))
        .collect();
    let mut out = Vec::new();
    for flight in flights {
        let mut cache: BTreeMap<&str, SampledTrajectory> = BTreeMap::new();
        let mut derive = |agent: &str| -> Result<SampledTrajectory> {
            if let Some(t) = cache.get(agent) {
                return Ok(t.clone());
            }
            let track = index.get(&(flight.as_str(), agent)).ok_or_else(|| Error::MissingTrack {
                flight: flight.clone(),
                agent: agent.into(),
            })?;
            let traj = differentiate(track, options.smoothing)?;
            cache.insert(track.pigeon_id.as_str(), traj.clone());
            Ok(traj)
        };
        for pair in hierarchy.pairs() {
            let follower = derive(&pair.follower)?;
            let leader = derive(&pair.leader)?;
            if (follower.dt() - leader.dt()).abs() > UNIFORM_TOL {
                return Err(Error::GridMismatch(alloc::format!(
                    "flight {flight}: {} sampled at {} s but {} at {} s",
                    pair.follower,
                    follower.dt(),
                    pair.leader,
                    leader.dt()
                )));
            }
            let desired_full = make_desired(&leader, pair.delay)?;
            let dt = follower.dt();
            let offset = index_offset(follower.t0(), leader.t0(), dt).ok_or_else(|| {
                Error::GridMismatch(alloc::format!(
                    "flight {flight}: grids of {} and {} are not aligned",
                    pair.follower,
                    pair.leader
                ))
            })?;
            // Overlap in follower indices [lo, hi).
            let lo = offset.max(0) as usize;
            let hi_f = follower.len() as isize;
            let hi_l = offset + leader.len() as isize;
            let hi = hi_f.min(hi_l);
            if hi - (lo as isize) < 2 {
                return Err(Error::GridMismatch(alloc::format!(
                    "flight {flight}: {} and {} do not overlap in time",
                    pair.follower,
                    pair.leader
                )));
            }
            let hi = hi as usize;
            let mut start = lo;
            let mut end = hi;
            if options.trim_warmup {
                start += delay_steps(pair.delay, dt).unwrap_or(0);
            }
            if let Some(ts) = options.t_start {
                let k = libm::ceil((ts - follower.t0()) / dt - 1e-9);
                start = start.max(k.max(0.0) as usize);
            }
            if let Some(te) = options.t_end {
                let k = libm::floor((te - follower.t0()) / dt + 1e-9);
                end = end.min((k.max(-1.0) + 1.0) as usize);
            }
            if end < start + 2 {
                return Err(Error::TooShort { len: end.saturating_sub(start), min: 2 });
            }
            let traj = follower.slice(start, end)?;
            let lstart = (start as isize - offset) as usize;
            let desired = desired_full.slice(lstart, lstart + (end - start))?;
            out.push(PairDataset {
                follower_id: pair.follower.clone(),
                leader_id: pair.leader.clone(),
                flight_id: flight.clone(),
                traj,
                desired,
                delay: pair.delay,
            });
        }
    }
    Ok(out)
}

/// Position error of double trapezoidal integration of `traj`'s controls
/// relative to its stored positions, as a fraction of the position range.
pub fn integration_drift(traj: &SampledTrajectory) -> f64 {
    let dt = traj.dt();
    let mut pos: Vector3<f64> = traj.state(0).position();
    let mut vel: Vector3<f64> = traj.state(0).velocity();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 1..traj.len() {
        let v_next = vel + (traj.control(k - 1).0 + traj.control(k).0) * (dt / 2.0);
        pos += (vel + v_next) * (dt / 2.0);
        vel = v_next;
        worst = worst.max((pos - traj.state(k).position()).amax());
        scale = scale.max(traj.state(k).position().amax());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}
