use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use irrl_core::learner::{self, Benchmark, Evaluation, EXPLORE_EVERY};
use irrl_core::policy::{load_checkpoint, param_count, save_checkpoint, PolicyParameters, CHECKPOINT_VERSION};
use irrl_core::weather::{load_weather_dir, parse_weather_file, write_weather_file};
use irrl_core::{synthetic, WeatherPool, WeatherYear};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{require_path, RunConfig};
use crate::error::{io_error, CliError};
use crate::output::{self, BenchmarkRow, ReplicateRow, ResultRow, ScheduleRow};

pub const RESOLVED_CONFIG: &str = "config.toml";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const SUMMARY: &str = "summary.toml";
pub const RESULTS: &str = "results.csv";
pub const REPLICATES: &str = "replicates.csv";
pub const BENCHMARK: &str = "benchmark.csv";

/// Command-line values that replace config file settings.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub alpha: Option<f64>,
    pub train_weather: Option<PathBuf>,
    pub test_weather: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub budget: Option<usize>,
    pub paper_format: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.train.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.paths.out_dir = Some(v.clone());
        }
        if let Some(v) = self.episodes {
            cfg.train.episodes_n = v;
        }
        if let Some(v) = self.alpha {
            cfg.train.alpha = v;
        }
        if let Some(v) = &self.train_weather {
            cfg.paths.train_weather = Some(v.clone());
        }
        if let Some(v) = &self.test_weather {
            cfg.paths.test_weather = Some(v.clone());
        }
        if let Some(v) = &self.checkpoint {
            cfg.paths.checkpoint = Some(v.clone());
        }
        if let Some(v) = &self.benchmark {
            cfg.paths.benchmark = Some(v.clone());
        }
        if let Some(v) = self.replicates {
            cfg.evaluate.replicates = v;
        }
        if let Some(v) = self.budget {
            cfg.benchmark.budget = v;
        }
        if self.paper_format {
            cfg.evaluate.paper_format = true;
        }
    }
}

/// Config file (or defaults) with overrides applied, validated.
pub fn resolve_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// A weather directory, or a single weather file.
pub fn load_weather(path: &Path) -> Result<Vec<WeatherYear>, CliError> {
    let years = if path.is_dir() {
        load_weather_dir(path)
    } else {
        parse_weather_file(path).map(|y| vec![y])
    };
    years.map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    let path = out.join(RESOLVED_CONFIG);
    fs::write(&path, cfg.to_toml()).map_err(|e| io_error(&path, e))?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub episodes: usize,
    pub best_episode: usize,
    pub best_ma: f64,
    pub architecture: String,
    pub parameters: usize,
    pub wall_time_s: f64,
}

pub fn train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let dir = require_path(&cfg.paths.train_weather, "paths.train_weather")?;
    let pool = WeatherPool::new(load_weather(&dir)?)
        .map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
    let out = prepare_out(cfg)?;
    let arch = cfg.architecture();
    let initial = learner::initial_parameters(&cfg.train, &arch, cfg.scaling())?;

    let every = cfg.train.checkpoint_every;
    let snapshots = out.join("checkpoints");
    if every > 0 {
        fs::create_dir_all(&snapshots).map_err(|e| io_error(&snapshots, e))?;
    }
    let mut snapshot_error = None;
    let started = Instant::now();
    let result = learner::train(&cfg.train, initial, &cfg.env, &pool, |row, params| {
        if every > 0 && row.episode % every == 0 && snapshot_error.is_none() {
            let path = snapshots.join(format!("episode_{:06}.ckpt", row.episode));
            snapshot_error = save_checkpoint(params, &path).err();
        }
    });
    let wall_time_s = started.elapsed().as_secs_f64();
    let log_path = out.join(TRAIN_LOG);
    let outcome = match result {
        Ok(o) => o,
        Err(failure) => {
            output::write_train_log(&log_path, &failure.log.rows)?;
            return Err(CliError::runtime(failure.to_string()));
        }
    };
    if let Some(e) = snapshot_error {
        return Err(e.into());
    }
    output::write_train_log(&log_path, &outcome.log.rows)?;
    save_checkpoint(&outcome.best, out.join(BEST_CHECKPOINT))?;
    let summary = TrainSummary {
        episodes: outcome.log.rows.len(),
        best_episode: outcome.log.best_episode,
        best_ma: outcome.log.best_ma,
        architecture: arch.to_string(),
        parameters: param_count(&arch),
        wall_time_s,
    };
    let path = out.join(SUMMARY);
    fs::write(&path, toml::to_string(&summary).expect("summary serializes")).map_err(|e| io_error(&path, e))?;
    Ok(summary)
}

/// Loads a checkpoint and checks it against the configured policy.
pub fn load_policy(cfg: &RunConfig, path: &Path) -> Result<PolicyParameters, CliError> {
    let params = load_checkpoint(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let arch = cfg.architecture();
    if params.arch != arch {
        return Err(CliError::config(format!(
            "{}: checkpoint architecture {} (first-layer bias {}) does not match config {} (first-layer bias {})",
            path.display(),
            params.arch,
            params.arch.bias_on_first_hidden,
            arch,
            arch.bias_on_first_hidden
        )));
    }
    if params.scaling != cfg.scaling() {
        return Err(CliError::config(format!(
            "{}: checkpoint input scaling does not match [policy] input_scaling",
            path.display()
        )));
    }
    Ok(params)
}

fn read_benchmarks(path: &Path) -> Result<BTreeMap<i32, f64>, CliError> {
    let rows: Vec<BenchmarkRow> = output::read_rows(path)?;
    Ok(rows.into_iter().map(|r| (r.year, r.benchmark_profit)).collect())
}

pub fn trace_file_name(year: i32, replicate: usize) -> String {
    format!("{year}_r{replicate:03}.csv")
}

pub struct EvaluateReport {
    pub rows: Vec<ResultRow>,
    pub evaluations: Vec<(i32, Evaluation)>,
}

pub fn evaluate(cfg: &RunConfig) -> Result<EvaluateReport, CliError> {
    let ckpt = require_path(&cfg.paths.checkpoint, "paths.checkpoint")?;
    let dir = require_path(&cfg.paths.test_weather, "paths.test_weather")?;
    let params = load_policy(cfg, &ckpt)?;
    let years = load_weather(&dir)?;
    let benchmarks = match &cfg.paths.benchmark {
        Some(p) => read_benchmarks(p)?,
        None => BTreeMap::new(),
    };
    let out = prepare_out(cfg)?;

    let replicates = cfg.evaluate.replicates;
    let seed = cfg.train.seed;
    let mut evaluations = years
        .par_iter()
        .map(|w| learner::evaluate(&params, &cfg.env, w, replicates, seed).map(|e| (w.year_id, e)))
        .collect::<irrl_core::Result<Vec<_>>>()?;
    evaluations.sort_by_key(|(y, _)| *y);

    let rows: Vec<ResultRow> = evaluations
        .iter()
        .map(|(year, e)| {
            let benchmark = benchmarks.get(year).copied();
            ResultRow {
                year: *year,
                benchmark,
                test_profit_mean: e.mean,
                test_profit_sd: e.sd,
                performance_pct: benchmark.and_then(|b| output::performance_pct(e.mean, b)),
            }
        })
        .collect();
    output::write_results(&out.join(RESULTS), &rows)?;

    let mut reps = Vec::new();
    for (year, e) in &evaluations {
        for (i, t) in e.traces.iter().enumerate() {
            reps.push(ReplicateRow {
                year: *year,
                replicate: i,
                profit: t.profit,
                yield_kg_ha: t.yield_kg_ha,
                cu_irrig: t.final_state.cu_irrig,
                days: t.len(),
            });
        }
    }
    output::write_rows(&out.join(REPLICATES), &reps)?;

    if cfg.evaluate.write_traces {
        let traces = out.join("traces");
        fs::create_dir_all(&traces).map_err(|e| io_error(&traces, e))?;
        for (year, e) in &evaluations {
            for (i, t) in e.traces.iter().enumerate() {
                let path = traces.join(trace_file_name(*year, i));
                output::write_trace_file(&path, t, &cfg.env.actions, cfg.evaluate.paper_format)?;
            }
        }
    }
    Ok(EvaluateReport { rows, evaluations })
}

#[derive(Debug, Clone, Serialize)]
struct BenchmarkMeta {
    budget: usize,
    alpha: f64,
    seed: u64,
    explore_every: usize,
    architecture: String,
    zero_schedule_seeded: bool,
}

pub fn benchmark(cfg: &RunConfig) -> Result<Vec<Benchmark>, CliError> {
    let path = require_path(&cfg.paths.test_weather, "paths.test_weather")?;
    let years = load_weather(&path)?;
    let out = prepare_out(cfg)?;
    let arch = cfg.architecture();
    let scaling = cfg.scaling();
    let mut results = years
        .par_iter()
        .map(|w| learner::benchmark_search(w, cfg.benchmark.budget, &cfg.train, &cfg.env, &arch, scaling.clone()))
        .collect::<irrl_core::Result<Vec<_>>>()?;
    results.sort_by_key(|b| b.year_id);

    let rows: Vec<BenchmarkRow> = results
        .iter()
        .map(|b| BenchmarkRow {
            year: b.year_id,
            benchmark_profit: b.best_profit,
            episodes_used: b.episodes_used,
        })
        .collect();
    output::write_rows(&out.join(BENCHMARK), &rows)?;
    let schedules = out.join("schedules");
    fs::create_dir_all(&schedules).map_err(|e| io_error(&schedules, e))?;
    for b in &results {
        let rows: Vec<ScheduleRow> = b
            .best_days
            .iter()
            .zip(&b.best_actions)
            .map(|(d, a)| ScheduleRow {
                day_of_year: *d,
                action_mm: cfg.env.actions.amounts()[*a],
            })
            .collect();
        output::write_rows(&schedules.join(format!("{}.csv", b.year_id)), &rows)?;
    }
    let meta = BenchmarkMeta {
        budget: cfg.benchmark.budget,
        alpha: cfg.train.alpha,
        seed: cfg.train.seed,
        explore_every: EXPLORE_EVERY,
        architecture: arch.to_string(),
        zero_schedule_seeded: true,
    };
    let path = out.join("benchmark_meta.toml");
    fs::write(&path, toml::to_string(&meta).expect("meta serializes")).map_err(|e| io_error(&path, e))?;
    Ok(results)
}

/// Human-readable checkpoint report.
pub fn inspect(path: &Path) -> Result<String, CliError> {
    let params = load_checkpoint(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let stats = params.stats();
    let scaling = if params.scaling.is_some() { "affine" } else { "none" };
    Ok(format!(
        "format version: {CHECKPOINT_VERSION}\n\
         architecture: {}\n\
         first-layer bias: {}\n\
         input scaling: {scaling}\n\
         parameters: {}\n\
         l2 norm: {}\n\
         max abs: {}\n\
         mean: {}\n",
        params.arch, params.arch.bias_on_first_hidden, stats.count, stats.l2_norm, stats.max_abs, stats.mean
    ))
}

/// Writes `count` synthetic seasons starting at `first_year` into `dir`.
pub fn synth_weather(dir: &Path, first_year: i32, count: usize, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    if count == 0 {
        return Err(CliError::config("count must be >= 1"));
    }
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    synthetic::synthetic_years(first_year, count, seed)
        .iter()
        .map(|y| write_weather_file(y, dir).map_err(CliError::from))
        .collect()
}
