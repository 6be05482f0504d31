//! Synthetic flock data: a scripted root leader and optimally tracking followers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flock_ioc_core::pipeline::resample;
use flock_ioc_core::{
    differentiate, rollout_hierarchy, AgentId, ControlVec, FlockHierarchy, RawTrack, SampledTrajectory, StateVec,
    TrackSample,
};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{CliError, Result};
use crate::io::{self, GroundTruth, PairRecord, WeightTable};

/// Root-leader motion.
#[derive(Clone, Debug, PartialEq)]
pub enum LeaderSpec {
    /// At rest at the origin.
    Zero,
    /// Helix `(sin ωt, cos ωt, 0.1 t)`.
    Sinusoid { omega: f64 },
    /// `sin ωt` along one axis only (0 = x, 1 = y, 2 = z).
    Axis { axis: usize, omega: f64 },
    /// Piecewise-linear through `(t, x, y, z)` waypoints, held after the last one.
    Polyline(Vec<(f64, [f64; 3])>),
    /// Positions read from a `t,x,y,z` CSV file.
    Csv(PathBuf),
}

impl FromStr for LeaderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let omega = || -> Result<f64, String> {
            match arg {
                None => Ok(1.0),
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite() && *w > 0.0)
                    .ok_or_else(|| format!("bad angular frequency {a:?} in leader spec {s:?}")),
            }
        };
        match kind {
            "zero" if arg.is_none() => Ok(LeaderSpec::Zero),
            "sinusoid" => Ok(LeaderSpec::Sinusoid { omega: omega()? }),
            "sinusoid-x" => Ok(LeaderSpec::Axis { axis: 0, omega: omega()? }),
            "sinusoid-y" => Ok(LeaderSpec::Axis { axis: 1, omega: omega()? }),
            "sinusoid-z" => Ok(LeaderSpec::Axis { axis: 2, omega: omega()? }),
            "polyline" => parse_polyline(arg.unwrap_or("")).map(LeaderSpec::Polyline),
            "csv" => match arg {
                Some(p) if !p.is_empty() => Ok(LeaderSpec::Csv(PathBuf::from(p))),
                _ => Err("csv leader spec needs a path, e.g. csv:leader.csv".into()),
            },
            _ => Err(format!(
                "unknown leader spec {s:?} (expected zero, sinusoid[:w], sinusoid-x[:w], sinusoid-y[:w], \
                 sinusoid-z[:w], polyline:t,x,y,z;... or csv:PATH)"
            )),
        }
    }
}

fn parse_polyline(arg: &str) -> Result<Vec<(f64, [f64; 3])>, String> {
    let mut points = Vec::new();
    for chunk in arg.split(';').filter(|c| !c.trim().is_empty()) {
        let v: Vec<f64> = chunk
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("bad polyline waypoint {chunk:?}"))?;
        if v.len() != 4 || v.iter().any(|x| !x.is_finite()) {
            return Err(format!("polyline waypoint {chunk:?} must be t,x,y,z"));
        }
        points.push((v[0], [v[1], v[2], v[3]]));
    }
    if points.is_empty() {
        return Err("polyline needs at least one waypoint".into());
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err("polyline waypoint times must increase".into());
    }
    Ok(points)
}

/// Number of samples covering `[0, horizon]` at period `dt`.
pub fn sample_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::Usage(format!("horizon {horizon} and dt {dt} must be positive")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(CliError::Usage(format!("horizon {horizon} s is not a whole number of {dt} s steps")));
    }
    Ok(steps as usize + 1)
}

pub fn leader_trajectory(spec: &LeaderSpec, horizon: f64, dt: f64) -> Result<SampledTrajectory> {
    let n = sample_count(horizon, dt)?;
    let from_fn = |f: &dyn Fn(f64) -> ([f64; 3], [f64; 3], [f64; 3])| -> Result<SampledTrajectory> {
        let mut states = Vec::with_capacity(n);
        let mut controls = Vec::with_capacity(n);
        for k in 0..n {
            let (p, v, a) = f(k as f64 * dt);
            states.push(StateVec::new(p, v));
            controls.push(ControlVec::new(a[0], a[1], a[2]));
        }
        Ok(SampledTrajectory::new(0.0, dt, states, controls)?)
    };
    match spec {
        LeaderSpec::Zero => from_fn(&|_| ([0.0; 3], [0.0; 3], [0.0; 3])),
        &LeaderSpec::Sinusoid { omega: w } => from_fn(&|t| {
            let (s, c) = (w * t).sin_cos();
            ([s, c, 0.1 * t], [w * c, -w * s, 0.1], [-w * w * s, -w * w * c, 0.0])
        }),
        &LeaderSpec::Axis { axis, omega: w } => from_fn(&|t| {
            let (s, c) = (w * t).sin_cos();
            let (mut p, mut v, mut a) = ([0.0; 3], [0.0; 3], [0.0; 3]);
            p[axis] = s;
            v[axis] = w * c;
            a[axis] = -w * w * s;
            (p, v, a)
        }),
        LeaderSpec::Polyline(points) => from_fn(&|t| polyline_at(points, t)),
        LeaderSpec::Csv(path) => csv_leader(path, n, dt),
    }
}

fn polyline_at(points: &[(f64, [f64; 3])], t: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return (first.1, [0.0; 3], [0.0; 3]);
    }
    if t >= last.0 {
        return (last.1, [0.0; 3], [0.0; 3]);
    }
    let j = points.partition_point(|p| p.0 <= t) - 1;
    let (t0, p0) = points[j];
    let (t1, p1) = points[j + 1];
    let s = (t - t0) / (t1 - t0);
    let mut p = [0.0; 3];
    let mut v = [0.0; 3];
    for i in 0..3 {
        p[i] = p0[i] + s * (p1[i] - p0[i]);
        v[i] = (p1[i] - p0[i]) / (t1 - t0);
    }
    (p, v, [0.0; 3])
}

fn csv_leader(path: &Path, n: usize, dt: f64) -> Result<SampledTrajectory> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::format(path, e.to_string()))?;
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::format(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let v: Vec<f64> = record
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Row { path: path.into(), line, message: "expected t,x,y,z numbers".into() })?;
        if v.len() != 4 {
            return Err(CliError::Row { path: path.into(), line, message: "expected t,x,y,z".into() });
        }
        samples.push(TrackSample { t: v[0], position: [v[1], v[2], v[3]] });
    }
    let raw = RawTrack::new("leader", "leader", samples);
    let track = resample(&raw, dt)?;
    let traj = differentiate(&track, 1)?;
    if traj.len() < n {
        return Err(CliError::format(
            path,
            format!("leader covers {} samples, horizon needs {n}", traj.len()),
        ));
    }
    // Re-anchored so every flight starts at t = 0.
    let (_, dt, states, controls) = traj.slice(0, n)?.into_parts();
    Ok(SampledTrajectory::new(0.0, dt, states, controls)?)
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub hierarchy: FlockHierarchy,
    /// One root-leader motion per flight.
    pub flights: Vec<(String, LeaderSpec)>,
    pub horizon: f64,
    pub dt: f64,
    pub weights: WeightTable,
    /// Each follower starts at its leader's initial state plus this offset.
    pub x0_offset: [f64; 6],
    /// Standard deviation of Gaussian noise added to every written position.
    pub noise: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub tracks: Vec<RawTrack>,
    pub truth: GroundTruth,
}

/// Simulates every flight of the flock.
pub fn synthesize(config: &SynthConfig) -> Result<SynthOutput> {
    let h = &config.hierarchy;
    h.ensure_valid(config.dt)?;
    if !(config.noise >= 0.0 && config.noise.is_finite()) {
        return Err(CliError::Usage(format!("noise level {} must be non-negative", config.noise)));
    }
    let weights = config.weights.resolve(h.followers())?;
    let offset = StateVec(config.x0_offset.into());
    let noise = Normal::new(0.0, config.noise).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rng = StdRng::seed_from_u64(config.seed);

    let mut tracks = Vec::new();
    for (flight, spec) in &config.flights {
        let root = leader_trajectory(spec, config.horizon, config.dt)?;
        let mut initial: BTreeMap<AgentId, StateVec> = BTreeMap::new();
        let root_id = h.roots().into_iter().next().unwrap_or_default().to_string();
        initial.insert(root_id, *root.state(0));
        for pair in h.topological_pairs()? {
            let start = StateVec(initial[&pair.leader].0 + offset.0);
            initial.insert(pair.follower.clone(), start);
        }
        let all = rollout_hierarchy(h, &root, &weights, &initial)?;
        for (agent, traj) in all {
            let samples = (0..traj.len())
                .map(|k| {
                    let mut position: [f64; 3] = traj.state(k).position().into();
                    if config.noise > 0.0 {
                        for p in position.iter_mut() {
                            *p += noise.sample(&mut rng);
                        }
                    }
                    TrackSample { t: traj.time(k), position }
                })
                .collect();
            tracks.push(RawTrack::new(flight.clone(), agent, samples));
        }
    }

    let truth = GroundTruth {
        hierarchy: h
            .pairs()
            .iter()
            .map(|p| PairRecord { leader: p.leader.clone(), follower: p.follower.clone(), delay: p.delay })
            .collect(),
        flights: config.flights.iter().map(|(f, _)| f.clone()).collect(),
        leaders: config.flights.iter().map(|(_, s)| describe(s)).collect(),
        horizon: config.horizon,
        dt: config.dt,
        noise: config.noise,
        seed: config.seed,
        weights: weights.iter().map(|(k, w)| (k.clone(), w.to_array())).collect(),
    };
    Ok(SynthOutput { tracks, truth })
}

fn describe(spec: &LeaderSpec) -> String {
    match spec {
        LeaderSpec::Zero => "zero".into(),
        LeaderSpec::Sinusoid { omega } => format!("sinusoid:{omega}"),
        LeaderSpec::Axis { axis, omega } => format!("sinusoid-{}:{omega}", ["x", "y", "z"][*axis]),
        LeaderSpec::Polyline(points) => {
            let parts: Vec<String> =
                points.iter().map(|(t, p)| format!("{t},{},{},{}", p[0], p[1], p[2])).collect();
            format!("polyline:{}", parts.join(";"))
        }
        LeaderSpec::Csv(path) => format!("csv:{}", path.display()),
    }
}

/// File names written by [`cmd_synth`].
pub const TRACKS_FILE: &str = "synth.csv";
pub const TRUTH_FILE: &str = "ground_truth.json";

/// Writes `synth.csv` and `ground_truth.json` into `out`.
pub fn cmd_synth(config: &SynthConfig, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let result = synthesize(config)?;
    io::ensure_dir(out)?;
    let csv_path = out.join(TRACKS_FILE);
    let truth_path = out.join(TRUTH_FILE);
    io::write_tracks(&csv_path, &result.tracks)?;
    io::write_json(&truth_path, &result.truth)?;
    Ok((csv_path, truth_path))
}
