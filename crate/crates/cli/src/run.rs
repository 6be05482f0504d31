//! The `ioc` and `diagnose` commands.

use std::collections::BTreeSet;
use std::path::PathBuf;

use flock_ioc_core::ioc::sum_grams;
use flock_ioc_core::pipeline::resample;
use flock_ioc_core::{
    build_pair_datasets, diagnose, gram_for_flight, solve_weights, Diagnostics, FlockHierarchy, GramMatrix,
    IocSolution, KnownWeights, LeaderFollowerPair, PairDataset, PipelineOptions, RawTrack, SolveOptions,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{self, DatasetRecord, FollowerRecord, KnownIndex, SolutionRecord};
use crate::report::{self, ReportRow};

/// Relative drop in r_w that counts as better conditioning.
pub const IMPROVEMENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// A `leader,follower,delay` file or `builtin:table1`.
    pub hierarchy: String,
    pub data: PathBuf,
    /// Empty means every flight present in the data.
    pub flights: Vec<String>,
    pub known: KnownWeights,
    pub trim_warmup: bool,
    pub clip: bool,
    pub smoothing: usize,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub resample: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub emit_datasets: bool,
}

impl RunConfig {
    pub fn new(hierarchy: impl Into<String>, data: impl Into<PathBuf>) -> Self {
        RunConfig {
            hierarchy: hierarchy.into(),
            data: data.into(),
            flights: Vec::new(),
            known: KnownWeights::default_normalization(),
            trim_warmup: false,
            clip: false,
            smoothing: 1,
            t_start: None,
            t_end: None,
            resample: None,
            out: None,
            jobs: None,
            emit_datasets: false,
        }
    }

    fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            smoothing: self.smoothing,
            trim_warmup: self.trim_warmup,
            t_start: self.t_start,
            t_end: self.t_end,
        }
    }
}

/// Builds the known-weight set from one-based CLI indices. A single value is
/// used for every index.
pub fn known_from_cli(indices: &[usize], values: &[f64]) -> Result<KnownWeights> {
    if indices.is_empty() {
        return Err(CliError::Usage("at least one known index is required".into()));
    }
    let values: Vec<f64> = match values.len() {
        1 => vec![values[0]; indices.len()],
        n if n == indices.len() => values.to_vec(),
        n => {
            return Err(CliError::Usage(format!("{} known indices but {n} known values", indices.len())));
        }
    };
    let mut entries = Vec::with_capacity(indices.len());
    for (&i, &v) in indices.iter().zip(&values) {
        if i == 0 {
            return Err(CliError::Usage("known indices are one-based (1..=9)".into()));
        }
        entries.push((i - 1, v));
    }
    KnownWeights::new(entries).map_err(|e| CliError::Usage(format!("known weights: {e}")))
}

struct Prepared {
    hierarchy: FlockHierarchy,
    tracks: Vec<RawTrack>,
    flights: Vec<String>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let hierarchy = io::load_hierarchy(&config.hierarchy)?;
    if hierarchy.pairs().is_empty() {
        return Err(CliError::Usage("hierarchy has no leader-follower pairs".into()));
    }
    let mut tracks = io::load_tracks(&config.data)?;
    if let Some(dt) = config.resample {
        tracks = tracks.iter().map(|t| resample(t, dt)).collect::<Result<_, _>>()?;
    }
    let flights = if config.flights.is_empty() {
        tracks.iter().map(|t| t.flight_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        config.flights.clone()
    };
    if flights.is_empty() {
        return Err(CliError::Usage("no flights to process".into()));
    }
    let dt = tracks.iter().find_map(|t| t.grid().ok()).map(|(_, dt)| dt);
    if let Some(dt) = dt {
        hierarchy.ensure_valid(dt)?;
    }
    Ok(Prepared { hierarchy, tracks, flights })
}

/// The datasets and Gram matrices of one follower, one per flight.
struct FollowerData {
    pair: LeaderFollowerPair,
    flights: Vec<(PairDataset, GramMatrix)>,
}

fn follower_data(prep: &Prepared, pair: &LeaderFollowerPair, opts: &PipelineOptions) -> Result<FollowerData, String> {
    let single = FlockHierarchy::new(vec![pair.clone()]);
    let mut flights = Vec::with_capacity(prep.flights.len());
    for flight in &prep.flights {
        let context = |e: &dyn std::fmt::Display| format!("follower {}, flight {flight}: {e}", pair.follower);
        let mut ds = build_pair_datasets(&prep.tracks, &single, std::slice::from_ref(flight), opts)
            .map_err(|e| context(&e))?;
        let dataset = ds.pop().ok_or_else(|| context(&"no dataset produced"))?;
        let gram = gram_for_flight(&dataset.traj, &dataset.desired).map_err(|e| context(&e))?;
        flights.push((dataset, gram));
    }
    Ok(FollowerData { pair: pair.clone(), flights })
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn combined_label(flights: &[String]) -> String {
    flights.join(", ")
}

fn stacked(flights: &[(PairDataset, GramMatrix)]) -> GramMatrix {
    flights.iter().fold(GramMatrix::zeros(), |acc, (_, g)| sum_grams(&acc, g))
}

/// Results of `ioc` for one follower.
#[derive(Clone, Debug)]
pub struct FollowerReport {
    pub follower: String,
    pub leader: String,
    pub delay: f64,
    /// `(flight, t_f, solution)` per flight.
    pub runs: Vec<(String, f64, IocSolution)>,
    pub combined: IocSolution,
    pub combined_t_f: f64,
    pub flights: Vec<String>,
    pub datasets: Vec<PairDataset>,
}

impl FollowerReport {
    pub fn record(&self) -> FollowerRecord {
        FollowerRecord {
            follower: self.follower.clone(),
            leader: self.leader.clone(),
            delay: self.delay,
            runs: self
                .runs
                .iter()
                .map(|(f, t_f, sol)| SolutionRecord::new(sol, vec![f.clone()], *t_f))
                .collect(),
            combined: SolutionRecord::new(&self.combined, self.flights.clone(), self.combined_t_f),
        }
    }

    pub fn table(&self) -> String {
        let labels = report::weight_labels(&self.combined.c_hat.known().unknown_indices());
        let mut rows: Vec<ReportRow> =
            self.runs.iter().map(|(f, t_f, sol)| ReportRow::from_solution(f.as_str(), *t_f, sol)).collect();
        rows.push(ReportRow::from_solution(combined_label(&self.flights), self.combined_t_f, &self.combined));
        let title = format!("Follower {} (leader {}, delay {} s)", self.follower, self.leader, self.delay);
        let mut text = report::render_table(&title, &labels, &rows);
        let flagged: Vec<String> = std::iter::once(("stacked", &self.combined))
            .chain(self.runs.iter().map(|(f, _, s)| (f.as_str(), s)))
            .filter_map(|(label, sol)| {
                let mut notes = Vec::new();
                if !sol.unique {
                    notes.push("not unique".to_string());
                }
                if !sol.sign_violations.is_empty() {
                    notes.push(format!("sign violations at {}", report::weight_labels(&sol.sign_violations).join(", ")));
                }
                if !sol.negatives_clipped.is_empty() {
                    notes.push(format!("clipped {}", report::weight_labels(&sol.negatives_clipped).join(", ")));
                }
                (!notes.is_empty()).then(|| format!("  {label}: {}", notes.join("; ")))
            })
            .collect();
        for line in flagged {
            text.push_str(&line);
            text.push('\n');
        }
        text
    }
}

#[derive(Clone, Debug)]
pub struct IocOutcome {
    pub reports: Vec<FollowerReport>,
    /// `(follower, message)` for followers that produced no solution.
    pub failures: Vec<(String, String)>,
}

impl IocOutcome {
    pub fn summary(&self) -> String {
        let mut text = String::new();
        for r in &self.reports {
            text.push_str(&r.table());
            text.push('\n');
        }
        for (_, msg) in &self.failures {
            text.push_str(&format!("FAILED {msg}\n"));
        }
        text
    }
}

fn ioc_follower(prep: &Prepared, pair: &LeaderFollowerPair, config: &RunConfig) -> Result<FollowerReport, String> {
    let data = follower_data(prep, pair, &config.pipeline_options())?;
    let opts = SolveOptions { clip_negatives: config.clip };
    let mut runs = Vec::with_capacity(data.flights.len());
    for (ds, gram) in &data.flights {
        let sol = solve_weights(gram, &config.known, opts)
            .map_err(|e| format!("follower {}, flight {}: {e}", pair.follower, ds.flight_id))?;
        runs.push((ds.flight_id.clone(), ds.traj.t_final(), sol));
    }
    let combined = solve_weights(&stacked(&data.flights), &config.known, opts)
        .map_err(|e| format!("follower {}, stacked flights: {e}", pair.follower))?;
    let combined_t_f = runs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(FollowerReport {
        follower: data.pair.follower.clone(),
        leader: data.pair.leader.clone(),
        delay: data.pair.delay,
        runs,
        combined,
        combined_t_f,
        flights: prep.flights.clone(),
        datasets: data.flights.into_iter().map(|(d, _)| d).collect(),
    })
}

/// Single-flight and stacked IOC for every follower of the hierarchy.
///
/// A failing follower is recorded in [`IocOutcome::failures`] and does not stop
/// the others. Files are written when `config.out` is set.
pub fn cmd_ioc(config: &RunConfig) -> Result<IocOutcome> {
    let prep = prepare(config)?;
    let pairs = prep.hierarchy.pairs().to_vec();
    let results: Vec<Result<FollowerReport, String>> =
        with_pool(config.jobs, || pairs.par_iter().map(|p| ioc_follower(&prep, p, config)).collect())?;

    let mut outcome = IocOutcome { reports: Vec::new(), failures: Vec::new() };
    for (pair, r) in pairs.iter().zip(results) {
        match r {
            Ok(rep) => outcome.reports.push(rep),
            Err(msg) => outcome.failures.push((pair.follower.clone(), msg)),
        }
    }

    if let Some(out) = &config.out {
        io::ensure_dir(out)?;
        for rep in &outcome.reports {
            io::write_json(&out.join(format!("{}.json", rep.follower)), &rep.record())?;
            io::write_text(&out.join(format!("{}.txt", rep.follower)), &rep.table())?;
            if config.emit_datasets {
                let dir = out.join("datasets");
                io::ensure_dir(&dir)?;
                for ds in &rep.datasets {
                    let name = format!("{}_{}.json", ds.flight_id, ds.follower_id);
                    io::write_json(&dir.join(name), &DatasetRecord::from(ds))?;
                }
            }
        }
        io::write_text(&out.join("summary.txt"), &outcome.summary())?;
    }
    Ok(outcome)
}

/// How stacking the flights changed identifiability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The stacked Gram matrix has no information at all.
    Degenerate,
    SingleFlight,
    Improved,
    NoNewInformation,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Degenerate => "rank 0 (degenerate)",
            Verdict::SingleFlight => "single flight",
            Verdict::Improved => "improved",
            Verdict::NoNewInformation => "no new information",
        })
    }
}

/// Compares the stacked run against the best single flight.
pub fn verdict(singles: &[Diagnostics], stacked: &Diagnostics) -> Verdict {
    if stacked.rank == 0 {
        return Verdict::Degenerate;
    }
    if singles.len() < 2 {
        return Verdict::SingleFlight;
    }
    let best_rank = singles.iter().map(|d| d.rank).max().unwrap_or(0);
    let best_rw = singles.iter().map(|d| d.r_w).fold(f64::INFINITY, f64::min);
    let better_conditioned = stacked.r_w.is_finite() && stacked.r_w < best_rw * (1.0 - IMPROVEMENT_TOL);
    if stacked.rank > best_rank || better_conditioned {
        Verdict::Improved
    } else {
        Verdict::NoNewInformation
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticRecord {
    pub flight_ids: Vec<String>,
    pub rank: usize,
    pub dimension: usize,
    /// `null` when singular.
    pub r_w: Option<f64>,
    pub spectrum: Vec<f64>,
    pub null_space: Vec<Vec<f64>>,
}

impl DiagnosticRecord {
    fn new(flight_ids: Vec<String>, d: &Diagnostics) -> Self {
        DiagnosticRecord {
            flight_ids,
            rank: d.rank,
            dimension: d.spectrum.len(),
            r_w: d.r_w.is_finite().then_some(d.r_w),
            spectrum: d.spectrum.clone(),
            null_space: d.null_space.iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }

    fn render(&self, out: &mut String) {
        let label = self.flight_ids.join(", ");
        let rw = self.r_w.map_or_else(|| "inf".to_string(), report::format_condition);
        out.push_str(&format!("  {label}: rank {}/{}, r_w {rw}\n", self.rank, self.dimension));
        out.push_str(&format!("    singular values: {}\n", report::format_spectrum(&self.spectrum)));
        for v in &self.null_space {
            out.push_str(&format!("    null direction: {}\n", report::format_direction(v)));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FollowerDiagnostics {
    pub follower: String,
    pub leader: String,
    pub delay: f64,
    pub known_index: KnownIndex,
    pub flights: Vec<DiagnosticRecord>,
    pub stacked: DiagnosticRecord,
    pub verdict: Verdict,
}

impl FollowerDiagnostics {
    pub fn render(&self) -> String {
        let mut out = format!("Follower {} (leader {}, delay {} s)\n", self.follower, self.leader, self.delay);
        for d in &self.flights {
            d.render(&mut out);
        }
        if self.flights.len() > 1 {
            self.stacked.render(&mut out);
        }
        out.push_str(&format!("  verdict: {}\n", self.verdict));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnoseOutcome {
    pub followers: Vec<FollowerDiagnostics>,
    pub failures: Vec<(String, String)>,
}

impl DiagnoseOutcome {
    pub fn summary(&self) -> String {
        let mut text = String::new();
        for f in &self.followers {
            text.push_str(&f.render());
            text.push('\n');
        }
        for (_, msg) in &self.failures {
            text.push_str(&format!("FAILED {msg}\n"));
        }
        text
    }
}

fn diagnose_follower(
    prep: &Prepared,
    pair: &LeaderFollowerPair,
    config: &RunConfig,
) -> Result<FollowerDiagnostics, String> {
    let data = follower_data(prep, pair, &config.pipeline_options())?;
    let singles: Vec<Diagnostics> = data.flights.iter().map(|(_, g)| diagnose(g, &config.known)).collect();
    let total = diagnose(&stacked(&data.flights), &config.known);
    Ok(FollowerDiagnostics {
        follower: pair.follower.clone(),
        leader: pair.leader.clone(),
        delay: pair.delay,
        known_index: KnownIndex::from_known(&config.known),
        flights: data
            .flights
            .iter()
            .zip(&singles)
            .map(|((ds, _), d)| DiagnosticRecord::new(vec![ds.flight_id.clone()], d))
            .collect(),
        stacked: DiagnosticRecord::new(prep.flights.clone(), &total),
        verdict: verdict(&singles, &total),
    })
}

/// Spectra, rank, r_w and null directions of the single and stacked Gram
/// matrices for every follower.
pub fn cmd_diagnose(config: &RunConfig) -> Result<DiagnoseOutcome> {
    let prep = prepare(config)?;
    let pairs = prep.hierarchy.pairs().to_vec();
    let results: Vec<Result<FollowerDiagnostics, String>> =
        with_pool(config.jobs, || pairs.par_iter().map(|p| diagnose_follower(&prep, p, config)).collect())?;
    let mut outcome = DiagnoseOutcome { followers: Vec::new(), failures: Vec::new() };
    for (pair, r) in pairs.iter().zip(results) {
        match r {
            Ok(d) => outcome.followers.push(d),
            Err(msg) => outcome.failures.push((pair.follower.clone(), msg)),
        }
    }
    if let Some(out) = &config.out {
        io::ensure_dir(out)?;
        io::write_json(&out.join("diagnostics.json"), &outcome)?;
        io::write_text(&out.join("diagnostics.txt"), &outcome.summary())?;
    }
    Ok(outcome)
}
