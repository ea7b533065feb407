//! Experiment orchestration behind the `simulate`, `equilibria` and `sweep`
//! commands, and the CSV/JSON artifacts they write.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::equilibrium::{build_payoff_matrix, find_pure_ne, PayoffMatrix};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::learning::{run_learning, RunRecord};
use crate::par::Execution;
use crate::scenario::Scenario;

/// Iterations averaged per point of the plot series.
pub const SERIES_WINDOW: usize = 15;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-line overrides of the scenario's learning and allocation settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub b: Option<f64>,
    pub max_iters: Option<usize>,
    pub p_threshold: Option<f64>,
    pub q: Option<f64>,
    pub grid_step: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario> {
        let mut s = scenario.clone();
        if let Some(seed) = self.seed {
            s.seeds = vec![seed];
        }
        if let Some(b) = self.b {
            s.learning.b = b;
        }
        if let Some(k) = self.max_iters {
            s.learning.max_iters = k;
        }
        if let Some(p) = self.p_threshold {
            s.learning.p_threshold = p;
        }
        if let Some(q) = self.q {
            s.learning.q = q;
        }
        if let Some(g) = self.grid_step {
            s.allocation.grid_step = Some(g);
        }
        s.validate()?;
        Ok(s)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialize(format!("{}: {other:?}", path.display())),
    }
}

/// Equilibrium oracle for a game, built once and shared by every run on it.
pub struct Certifier {
    pub matrix: PayoffMatrix,
    pub pure_ne: Vec<Vec<usize>>,
}

impl Certifier {
    pub fn build(game: &Game, scenario: &Scenario, execution: Execution) -> Result<Self> {
        let matrix = build_payoff_matrix(game, scenario.allocation.profile_cap as u128, execution)
            .map_err(|e| e.with_context(&scenario.name))?;
        let pure_ne = find_pure_ne(&matrix);
        Ok(Self { matrix, pure_ne })
    }

    pub fn is_member(&self, profile: &[usize]) -> bool {
        self.pure_ne.iter().any(|p| p == profile)
    }
}

/// Everything written for one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub code_version: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub grid_step: f64,
    pub converged: bool,
    pub convergence_iteration: Option<usize>,
    pub iterations: usize,
    pub connections: u64,
    pub profile_indices: Vec<usize>,
    pub profile: Vec<f64>,
    /// Whether the final profile is a pure equilibrium; `None` when the run did
    /// not converge.
    pub ne_certified: Option<bool>,
    pub pure_ne_count: usize,
    /// Expected utilities of the final profile.
    pub expected_gains: Vec<f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SimulateArtifact {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub record: RunRecord,
}

/// Runs the learning loop for every seed of `scenario` and writes
/// `seed-<S>/{runs.csv, gain_series.csv, prob_series.csv, manifest.json}`.
pub fn cmd_simulate(
    scenario: &Scenario,
    overrides: &Overrides,
    out: &Path,
    execution: Execution,
) -> Result<Vec<SimulateArtifact>> {
    let scenario = overrides.apply(scenario)?;
    let game = scenario.game(execution)?;
    let certifier = Certifier::build(&game, &scenario, execution)?;
    let grid_step = scenario.grid_step()?;
    let records = execution.map(&scenario.seeds, |&seed| run_learning(&game, &scenario.learning, seed));
    let mut artifacts = Vec::new();
    for record in records {
        let record = record.map_err(|e| e.with_context(&scenario.name))?;
        let dir = out.join(format!("seed-{}", record.seed));
        create_dir(&dir)?;
        write_runs_csv(&dir.join("runs.csv"), &game, &record)?;
        write_gain_series(&dir.join("gain_series.csv"), &record)?;
        write_prob_series(&dir.join("prob_series.csv"), &game, &record)?;
        let expected = game.outcome(&record.profile)?;
        let manifest = Manifest {
            code_version: CODE_VERSION.to_string(),
            scenario: scenario.clone(),
            seed: record.seed,
            grid_step,
            converged: record.converged,
            convergence_iteration: record.convergence_iteration,
            iterations: record.iterations(),
            connections: record.connections,
            profile_indices: record.profile.clone(),
            profile: game.values(&record.profile),
            ne_certified: record.converged.then(|| certifier.is_member(&record.profile)),
            pure_ne_count: certifier.pure_ne.len(),
            expected_gains: expected.utilities.iter().map(|u| u.raw).collect(),
            files: ["runs.csv", "gain_series.csv", "prob_series.csv", "manifest.json"]
                .map(String::from)
                .to_vec(),
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        artifacts.push(SimulateArtifact {
            dir,
            manifest,
            record,
        });
    }
    Ok(artifacts)
}

#[derive(Serialize)]
struct RunRow {
    iteration: usize,
    src: usize,
    strategy_index: usize,
    strategy: f64,
    gain: f64,
    max_prob: f64,
}

fn write_runs_csv(path: &Path, game: &Game, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (t, it) in record.trajectory.iter().enumerate() {
        for (i, &k) in it.played.iter().enumerate() {
            let max_prob = it.probs[i].iter().cloned().fold(0.0, f64::max);
            w.serialize(RunRow {
                iteration: t + 1,
                src: i + 1,
                strategy_index: k,
                strategy: game.sets[i].value(k),
                gain: it.gains[i],
                max_prob,
            })
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Disjoint windows `[start, end]` (1-based, inclusive) of at most `width` iterations.
pub fn windows(len: usize, width: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len)
        .step_by(width)
        .map(move |start| (start + 1, (start + width).min(len)))
}

#[derive(Serialize)]
struct GainPoint {
    window: usize,
    start: usize,
    end: usize,
    src: usize,
    expected_gain: f64,
}

fn write_gain_series(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (k, (start, end)) in windows(record.iterations(), SERIES_WINDOW).enumerate() {
        let slice = &record.trajectory[start - 1..end];
        let n = slice[0].utilities.len();
        for i in 0..n {
            let mean = slice.iter().map(|it| it.utilities[i]).sum::<f64>() / slice.len() as f64;
            w.serialize(GainPoint {
                window: k + 1,
                start,
                end,
                src: i + 1,
                expected_gain: mean,
            })
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ProbPoint {
    window: usize,
    start: usize,
    end: usize,
    src: usize,
    strategy: f64,
    probability: f64,
}

fn write_prob_series(path: &Path, game: &Game, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (k, (start, end)) in windows(record.iterations(), SERIES_WINDOW).enumerate() {
        let slice = &record.trajectory[start - 1..end];
        for (i, set) in game.sets.iter().enumerate() {
            for (j, &value) in set.values.iter().enumerate() {
                let mean = slice.iter().map(|it| it.probs[i][j]).sum::<f64>() / slice.len() as f64;
                w.serialize(ProbPoint {
                    window: k + 1,
                    start,
                    end,
                    src: i + 1,
                    strategy: value,
                    probability: mean,
                })
                .map_err(|e| csv_error(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriaSummary {
    pub scenario: String,
    pub profiles: usize,
    pub pure_ne: Vec<Vec<f64>>,
}

/// Writes `payoff_matrix.csv`, `pure_ne.csv` and `equilibria.json`.
pub fn cmd_equilibria(
    scenario: &Scenario,
    grid_step: Option<f64>,
    out: &Path,
    execution: Execution,
) -> Result<(Certifier, EquilibriaSummary)> {
    let scenario = Overrides {
        grid_step,
        ..Overrides::default()
    }
    .apply(scenario)?;
    let game = scenario.game(execution)?;
    let certifier = Certifier::build(&game, &scenario, execution)?;
    create_dir(out)?;
    let n = game.n();

    let path = out.join("payoff_matrix.csv");
    let mut w = csv_writer(&path)?;
    let header: Vec<String> = (1..=n)
        .map(|i| format!("s{i}"))
        .chain((1..=n).map(|i| format!("u{i}")))
        .chain(std::iter::once("pure_ne".to_string()))
        .collect();
    w.write_record(&header).map_err(|e| csv_error(&path, e))?;
    for k in 0..certifier.matrix.len() {
        let profile = certifier.matrix.profile_at(k);
        let row: Vec<String> = game
            .values(&profile)
            .iter()
            .chain(&certifier.matrix.utilities[k])
            .map(|x| x.to_string())
            .chain(std::iter::once(certifier.matrix.is_pure_ne(&profile).to_string()))
            .collect();
        w.write_record(&row).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("pure_ne.csv");
    let mut w = csv_writer(&path)?;
    w.write_record((1..=n).map(|i| format!("s{i}")))
        .map_err(|e| csv_error(&path, e))?;
    for p in &certifier.pure_ne {
        w.write_record(game.values(p).iter().map(|x| x.to_string()))
            .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let summary = EquilibriaSummary {
        scenario: scenario.name.clone(),
        profiles: certifier.matrix.len(),
        pure_ne: certifier.pure_ne.iter().map(|p| game.values(p)).collect(),
    };
    write_json(&out.join("equilibria.json"), &summary)?;
    Ok((certifier, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub n: usize,
    pub seed: u64,
    pub converged: bool,
    pub convergence_iteration: Option<usize>,
    pub connections: u64,
    pub profile: Vec<f64>,
    pub ne_member: Option<bool>,
    pub expected_gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub seeds: usize,
    pub converged: usize,
    pub median_iterations: Option<f64>,
    pub ne_certified: usize,
    pub pure_ne_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub entries: Vec<SweepEntry>,
    /// Whether median iterations never decrease with N (reported, not enforced).
    pub nondecreasing: bool,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    })
}

/// For each `n`, clones the first customer `n` times and runs every seed.
pub fn cmd_sweep(
    base: &Scenario,
    ns: &[usize],
    seeds: &[u64],
    out: Option<&Path>,
    execution: Execution,
) -> Result<SweepResult> {
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for &n in ns {
        let scenario = base.with_n(n);
        scenario.validate()?;
        let game = scenario.game(execution)?;
        let certifier = Certifier::build(&game, &scenario, execution)?;
        let records = execution.map(seeds, |&seed| run_learning(&game, &scenario.learning, seed));
        let mut iters = Vec::new();
        let mut certified = 0;
        for record in records {
            let record = record.map_err(|e| e.with_context(&scenario.name))?;
            let ne_member = record.converged.then(|| certifier.is_member(&record.profile));
            if let Some(t) = record.convergence_iteration {
                iters.push(t as f64);
            }
            if ne_member == Some(true) {
                certified += 1;
            }
            entries.push(SweepEntry {
                n,
                seed: record.seed,
                converged: record.converged,
                convergence_iteration: record.convergence_iteration,
                connections: record.connections,
                profile: game.values(&record.profile),
                ne_member,
                expected_gains: game.outcome(&record.profile)?.utilities.iter().map(|u| u.raw).collect(),
            });
        }
        rows.push(SweepRow {
            n,
            seeds: seeds.len(),
            converged: iters.len(),
            median_iterations: median(&mut iters),
            ne_certified: certified,
            pure_ne_count: certifier.pure_ne.len(),
        });
    }
    let medians: Vec<f64> = rows.iter().filter_map(|r| r.median_iterations).collect();
    let result = SweepResult {
        nondecreasing: medians.windows(2).all(|w| w[0] <= w[1]),
        rows,
        entries,
    };
    if let Some(out) = out {
        write_sweep(out, &result)?;
    }
    Ok(result)
}

fn write_sweep(out: &Path, result: &SweepResult) -> Result<()> {
    create_dir(out)?;
    let path = out.join("table1.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["n", "seeds", "converged", "median_iterations", "ne_certified", "pure_ne_count"])
        .map_err(|e| csv_error(&path, e))?;
    for r in &result.rows {
        w.write_record([
            r.n.to_string(),
            r.seeds.to_string(),
            r.converged.to_string(),
            r.median_iterations.map(|m| m.to_string()).unwrap_or_default(),
            r.ne_certified.to_string(),
            r.pure_ne_count.to_string(),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("sweep_runs.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["n", "seed", "converged", "convergence_iteration", "connections", "profile", "ne_member"])
        .map_err(|e| csv_error(&path, e))?;
    for e in &result.entries {
        let profile: Vec<String> = e.profile.iter().map(|x| x.to_string()).collect();
        w.write_record([
            e.n.to_string(),
            e.seed.to_string(),
            e.converged.to_string(),
            e.convergence_iteration.map(|t| t.to_string()).unwrap_or_default(),
            e.connections.to_string(),
            profile.join(" "),
            e.ne_member.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&out.join("sweep.json"), result)
}
