//! File formats: track CSV, hierarchy text, weights and result JSON.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Read;
use std::path::Path;

use flock_ioc_core::pipeline::project_equirectangular;
use flock_ioc_core::{
    AgentId, FlockHierarchy, IocSolution, KnownWeights, PairDataset, RawTrack, SampledTrajectory, TrackSample,
    WeightVector, BASIS_DIM,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Hierarchy argument naming the built-in ten-pigeon flock.
pub const BUILTIN_HIERARCHY: &str = "builtin:table1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Coordinates {
    Cartesian,
    Geodetic,
}

struct Columns {
    flight: usize,
    pigeon: usize,
    t: usize,
    coords: [usize; 3],
    kind: Coordinates,
}

impl Columns {
    fn from_header(header: &csv::StringRecord, path: &Path) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        let require = |name: &str| {
            find(name).ok_or_else(|| CliError::format(path, format!("missing column {name:?} in header")))
        };
        let cart = [find("x"), find("y"), find("z")];
        let geo = [find("lat"), find("lon"), find("alt")];
        let has_cart = cart.iter().any(Option::is_some);
        let has_geo = geo.iter().any(Option::is_some);
        let (kind, names, cols) = match (has_cart, has_geo) {
            (true, true) => {
                return Err(CliError::format(path, "mixed coordinate conventions: both x,y,z and lat,lon,alt columns"))
            }
            (false, false) => {
                return Err(CliError::format(path, "header needs either x,y,z or lat,lon,alt columns"))
            }
            (true, false) => (Coordinates::Cartesian, ["x", "y", "z"], cart),
            (false, true) => (Coordinates::Geodetic, ["lat", "lon", "alt"], geo),
        };
        let mut coords = [0; 3];
        for (slot, (col, name)) in coords.iter_mut().zip(cols.iter().zip(names)) {
            *slot = col.ok_or_else(|| CliError::format(path, format!("missing column {name:?} in header")))?;
        }
        Ok(Columns { flight: require("flight_id")?, pigeon: require("pigeon_id")?, t: require("t")?, coords, kind })
    }
}

pub fn load_tracks(path: &Path) -> Result<Vec<RawTrack>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_tracks(file, path)
}

/// Parses the track CSV. `path` is only used in error messages.
///
/// Tracks come back ordered by (flight, pigeon). Geodetic input is projected
/// around the earliest sample of each flight.
pub fn read_tracks<R: Read>(reader: R, path: &Path) -> Result<Vec<RawTrack>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols = Columns::from_header(&header, path)?;

    let mut grouped: BTreeMap<(String, String), Vec<TrackSample>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| CliError::Row { path: path.into(), line, message };
        let field = |i: usize| record.get(i).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            let raw = field(i);
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(row_err(format!("column {:?}: not a finite number: {raw:?}", &header[i]))),
            }
        };
        let (flight, pigeon) = (field(cols.flight), field(cols.pigeon));
        if flight.is_empty() || pigeon.is_empty() {
            return Err(row_err("empty flight_id or pigeon_id".into()));
        }
        let t = number(cols.t)?;
        let position = [number(cols.coords[0])?, number(cols.coords[1])?, number(cols.coords[2])?];
        let samples = grouped.entry((flight.to_string(), pigeon.to_string())).or_default();
        if let Some(last) = samples.last() {
            if !(t > last.t) {
                return Err(row_err(format!(
                    "non-monotone timestamps in track {flight}/{pigeon}: t={t} after t={}",
                    last.t
                )));
            }
        }
        samples.push(TrackSample { t, position });
    }

    if cols.kind == Coordinates::Geodetic {
        let mut origins: BTreeMap<String, TrackSample> = BTreeMap::new();
        for ((flight, _), samples) in &grouped {
            let first = samples[0];
            origins
                .entry(flight.clone())
                .and_modify(|o| {
                    if first.t < o.t {
                        *o = first;
                    }
                })
                .or_insert(first);
        }
        for ((flight, _), samples) in grouped.iter_mut() {
            let o = origins[flight].position;
            for s in samples.iter_mut() {
                s.position = project_equirectangular(s.position[0], s.position[1], s.position[2], (o[0], o[1], o[2]));
            }
        }
    }

    Ok(grouped.into_iter().map(|((flight, pigeon), samples)| RawTrack::new(flight, pigeon, samples)).collect())
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(p) => CliError::Row { path: path.into(), line: p.line(), message: e.to_string() },
        None => CliError::format(path, e.to_string()),
    }
}

/// Writes tracks in the `flight_id,pigeon_id,t,x,y,z` schema with round-trip precision.
pub fn write_tracks(path: &Path, tracks: &[RawTrack]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
    let wrap = |e: csv::Error| CliError::format(path, e.to_string());
    w.write_record(["flight_id", "pigeon_id", "t", "x", "y", "z"]).map_err(wrap)?;
    for track in tracks {
        for s in &track.samples {
            w.write_record([
                track.flight_id.clone(),
                track.pigeon_id.clone(),
                s.t.to_string(),
                s.position[0].to_string(),
                s.position[1].to_string(),
                s.position[2].to_string(),
            ])
            .map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Resolves `builtin:table1` or reads a `leader,follower,delay` file.
pub fn load_hierarchy(spec: &str) -> Result<FlockHierarchy> {
    if spec == BUILTIN_HIERARCHY {
        return Ok(FlockHierarchy::default_pigeons());
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    FlockHierarchy::parse(&text).map_err(|e| CliError::format(path, e.to_string()))
}

/// Per-agent weight vectors; the `*` entry applies to agents not listed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightTable(pub BTreeMap<String, [f64; BASIS_DIM]>);

impl WeightTable {
    pub const DEFAULT_KEY: &'static str = "*";

    pub fn uniform(values: [f64; BASIS_DIM]) -> Self {
        WeightTable([(Self::DEFAULT_KEY.to_string(), values)].into_iter().collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn get(&self, agent: &str) -> Option<&[f64; BASIS_DIM]> {
        self.0.get(agent).or_else(|| self.0.get(Self::DEFAULT_KEY))
    }

    /// Weight vectors for every follower; each must define a valid tracking problem.
    pub fn resolve<'a>(
        &self,
        followers: impl IntoIterator<Item = &'a str>,
    ) -> Result<BTreeMap<AgentId, WeightVector>> {
        let mut out = BTreeMap::new();
        for f in followers {
            let values = self.get(f).ok_or_else(|| flock_ioc_core::Error::MissingWeights(f.into()))?;
            let w = WeightVector::new(*values).map_err(|e| CliError::Usage(format!("weights for {f}: {e}")))?;
            w.ensure_forward_valid().map_err(|e| CliError::Usage(format!("weights for {f}: {e}")))?;
            out.insert(f.to_string(), w);
        }
        Ok(out)
    }
}

/// Known-index field: a bare number for a single pinned weight, a list otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnownIndex {
    Single(usize),
    Several(Vec<usize>),
}

impl KnownIndex {
    pub fn from_known(known: &KnownWeights) -> Self {
        let idx: Vec<usize> = known.indices().map(|i| i + 1).collect();
        match idx.as_slice() {
            [one] => KnownIndex::Single(*one),
            _ => KnownIndex::Several(idx),
        }
    }
}

/// Serialized form of one IOC run. Indices are one-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub c_hat: [f64; BASIS_DIM],
    pub known_index: KnownIndex,
    pub known_values: Vec<f64>,
    /// `null` when the reduced Gram matrix is singular.
    pub r_w: Option<f64>,
    pub residual: f64,
    pub unique: bool,
    pub negatives_clipped: Vec<usize>,
    pub sign_violations: Vec<usize>,
    pub flight_ids: Vec<String>,
    pub t_f: f64,
}

impl SolutionRecord {
    pub fn new(sol: &IocSolution, flight_ids: Vec<String>, t_f: f64) -> Self {
        let known = sol.c_hat.known();
        SolutionRecord {
            c_hat: sol.c_hat.to_array(),
            known_index: KnownIndex::from_known(known),
            known_values: known.entries().iter().map(|&(_, v)| v).collect(),
            r_w: sol.r_w.is_finite().then_some(sol.r_w),
            residual: sol.residual,
            unique: sol.unique,
            negatives_clipped: sol.negatives_clipped.iter().map(|i| i + 1).collect(),
            sign_violations: sol.sign_violations.iter().map(|i| i + 1).collect(),
            flight_ids,
            t_f,
        }
    }
}

/// All runs for one follower: one per flight plus the stacked run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollowerRecord {
    pub follower: String,
    pub leader: String,
    pub delay: f64,
    pub runs: Vec<SolutionRecord>,
    pub combined: SolutionRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub follower_id: String,
    pub leader_id: String,
    pub flight_id: String,
    pub delay: f64,
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
    pub states: Vec<[f64; 6]>,
    pub controls: Vec<[f64; 3]>,
    pub desired: Vec<[f64; 6]>,
}

impl From<&PairDataset> for DatasetRecord {
    fn from(d: &PairDataset) -> Self {
        let states = |t: &SampledTrajectory| t.states().iter().map(|s| s.0.into()).collect();
        DatasetRecord {
            follower_id: d.follower_id.clone(),
            leader_id: d.leader_id.clone(),
            flight_id: d.flight_id.clone(),
            delay: d.delay,
            t0: d.traj.t0(),
            dt: d.traj.dt(),
            len: d.traj.len(),
            states: states(&d.traj),
            controls: d.traj.controls().iter().map(|u| u.0.into()).collect(),
            desired: states(&d.desired),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub leader: String,
    pub follower: String,
    pub delay: f64,
}

/// What `synth` used to generate its data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub hierarchy: Vec<PairRecord>,
    pub flights: Vec<String>,
    pub leaders: Vec<String>,
    pub horizon: f64,
    pub dt: f64,
    pub noise: f64,
    pub seed: u64,
    pub weights: BTreeMap<String, [f64; BASIS_DIM]>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Json { path: path.into(), source: e })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json { path: path.into(), source: e })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
