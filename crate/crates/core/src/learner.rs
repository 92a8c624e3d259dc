//! REINFORCE training, moving-average model selection, replicate evaluation and the
//! per-year benchmark search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cropsim::{replay_actions, CropEnv, EnvConfig};
use crate::env::Environment;
use crate::episode::{EpisodeTrace, StepRecord, Termination};
use crate::error::{Error, Result};
use crate::policy::{apply_update, forward, init_parameters, sample_action, Architecture, InputScaling, PolicyParameters};
use crate::rng::{self, Stream};
use crate::weather::{sample_training_year, WeatherPool, WeatherYear};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes_n: usize,
    pub alpha: f64,
    pub ma_order: usize,
    pub seed: u64,
    /// Emit the current θ to the observer every this many episodes (0 = never).
    pub checkpoint_every: usize,
    /// Standard deviation of the normal initialisation.
    pub init_scale: f64,
    /// Evaluate every ∇log π of an episode at the episode-start θ instead of the
    /// θ being updated inside the backward loop.
    pub frozen_theta_gradients: bool,
    /// Optional clamp on ‖∇log π‖₂ per step.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes_n: 20_000,
            alpha: 1e-7,
            ma_order: 100,
            seed: 0,
            checkpoint_every: 0,
            init_scale: 1.0,
            frozen_theta_gradients: false,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes_n == 0 {
            return Err(Error::domain("episodes_n must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.ma_order == 0 {
            return Err(Error::domain("ma_order must be >= 1"));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::domain("init_scale must be > 0"));
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) {
                return Err(Error::domain("max_grad_norm must be > 0 when set"));
            }
        }
        Ok(())
    }

    fn update_options(&self) -> UpdateOptions {
        UpdateOptions {
            frozen_theta_gradients: self.frozen_theta_gradients,
            max_grad_norm: self.max_grad_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateOptions {
    pub frozen_theta_gradients: bool,
    pub max_grad_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    /// 1-based.
    pub episode: usize,
    pub year_id: i32,
    pub profit: f64,
    pub ma: f64,
    pub length: usize,
    pub cuirrig: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    pub best_episode: usize,
    pub best_ma: f64,
}

impl TrainLog {
    pub fn profits(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.profit).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: PolicyParameters,
    pub last: PolicyParameters,
    pub log: TrainLog,
}

/// A failed run, with whatever was logged before the failure.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub log: TrainLog,
}

impl std::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} logged episodes)", self.error, self.log.rows.len())
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// `out[n]` is the mean of the last `order` values up to and including `n`; for
/// `n < order` it is the mean of everything so far. Each window is summed directly
/// in index order.
pub fn moving_average(values: &[f64], order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::domain("moving average order must be >= 1"));
    }
    Ok((0..values.len()).map(|n| window_mean(values, n, order)).collect())
}

fn window_mean(values: &[f64], n: usize, order: usize) -> f64 {
    let lo = (n + 1).saturating_sub(order);
    let window = &values[lo..=n];
    window.iter().sum::<f64>() / window.len() as f64
}

/// Rolls out one episode under π_θ, recording the full distribution at every step.
pub fn run_episode<E: Environment, R: Rng + ?Sized>(
    env: &mut E,
    params: &PolicyParameters,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    if env.is_done() {
        return Err(Error::Usage("run_episode needs a freshly reset environment".into()));
    }
    let mut steps = Vec::new();
    let mut final_state = env.state();
    while !env.is_done() {
        let state = env.state();
        let day_of_year = env.day_of_year();
        let action_probs = forward(params, &state)?;
        let action_index = sample_action(&action_probs, rng)?;
        let tr = env.step(action_index)?;
        final_state = tr.state;
        steps.push(StepRecord {
            day_of_year,
            state,
            action_probs,
            action_index,
            reward: tr.reward,
        });
    }
    let profit = steps.iter().map(|s| s.reward).sum();
    Ok(EpisodeTrace {
        steps,
        yield_kg_ha: env.final_yield().unwrap_or(0.0),
        profit,
        weather_year_id: env.episode_id(),
        termination: env.termination().unwrap_or(Termination::Environment),
        final_state,
    })
}

/// Backward pass of REINFORCE over one episode: for t = T-1 … 0, G += R_{t+1} and
/// θ += α·G·∇log π_θ(A_t|S_t), with the gradient taken at the θ current at that
/// step (or at the episode-start θ with `frozen_theta_gradients`).
pub fn reinforce_episode_update(
    params: &mut PolicyParameters,
    trace: &EpisodeTrace,
    alpha: f64,
    options: UpdateOptions,
) -> Result<()> {
    let frozen = options.frozen_theta_gradients.then(|| params.clone());
    let mut grad = vec![0.0; params.len()];
    let mut g = 0.0;
    for t in (0..trace.steps.len()).rev() {
        let step = &trace.steps[t];
        g += step.reward;
        if alpha * g == 0.0 {
            continue;
        }
        grad.iter_mut().for_each(|v| *v = 0.0);
        let at = frozen.as_ref().unwrap_or(params);
        let x = step.state.to_array();
        at.accumulate_grad_log_prob(&x, step.action_index, 1.0, &mut grad)
            .map_err(|e| at_step(e, t))?;
        if let Some(max) = options.max_grad_norm {
            let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > max {
                let k = max / norm;
                grad.iter_mut().for_each(|v| *v *= k);
            }
        }
        apply_update(params, alpha, g, &grad).map_err(|e| at_step(e, t))?;
    }
    Ok(())
}

fn at_step(e: Error, t: usize) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("step t={t}: {m}")),
        other => other,
    }
}

/// Generic REINFORCE loop. `make_env(n)` builds the environment of episode `n`
/// (1-based); `observer` sees every log row with the θ after that episode's update.
pub fn train_with<E, F, O>(
    config: &TrainConfig,
    initial: PolicyParameters,
    mut make_env: F,
    mut observer: O,
) -> std::result::Result<TrainOutcome, TrainFailure>
where
    E: Environment,
    F: FnMut(usize) -> Result<E>,
    O: FnMut(&LogRow, &PolicyParameters),
{
    let mut log = TrainLog {
        best_ma: f64::NEG_INFINITY,
        ..TrainLog::default()
    };
    if let Err(error) = config.validate() {
        return Err(TrainFailure { error, log });
    }
    let mut action_rng = rng::stream(config.seed, Stream::ActionSampling);
    let options = config.update_options();
    let mut params = initial;
    let mut best = params.clone();
    let mut profits = Vec::with_capacity(config.episodes_n);

    for n in 1..=config.episodes_n {
        let result = (|| -> Result<(EpisodeTrace, i32)> {
            let mut env = make_env(n)?;
            let trace = run_episode(&mut env, &params, &mut action_rng)?;
            reinforce_episode_update(&mut params, &trace, config.alpha, options)?;
            Ok((trace, env.episode_id()))
        })();
        let (trace, year_id) = match result {
            Ok(v) => v,
            Err(e) => {
                let error = match e {
                    Error::Numeric(m) => Error::Numeric(format!("episode {n}, {m}")),
                    other => other,
                };
                return Err(TrainFailure { error, log });
            }
        };
        profits.push(trace.profit);
        let ma = window_mean(&profits, n - 1, config.ma_order);
        let row = LogRow {
            episode: n,
            year_id,
            profit: trace.profit,
            ma,
            length: trace.len(),
            cuirrig: trace.final_state.cu_irrig,
        };
        if ma > log.best_ma {
            log.best_ma = ma;
            log.best_episode = n;
            best.clone_from(&params);
        }
        observer(&row, &params);
        log.rows.push(row);
    }
    Ok(TrainOutcome {
        best,
        last: params,
        log,
    })
}

/// Initial θ for a run: N(0, init_scale²) from the run's init stream.
pub fn initial_parameters(
    config: &TrainConfig,
    arch: &Architecture,
    scaling: Option<InputScaling>,
) -> Result<PolicyParameters> {
    let mut r = rng::stream(config.seed, Stream::Init);
    init_parameters(arch, &mut r, config.init_scale)?.with_scaling(scaling)
}

/// Trains on seasons drawn uniformly from `pool`.
pub fn train<O>(
    config: &TrainConfig,
    initial: PolicyParameters,
    env_config: &EnvConfig,
    pool: &WeatherPool,
    observer: O,
) -> std::result::Result<TrainOutcome, TrainFailure>
where
    O: FnMut(&LogRow, &PolicyParameters),
{
    if let Err(error) = env_config.validate() {
        return Err(TrainFailure {
            error,
            log: TrainLog::default(),
        });
    }
    let mut weather_rng = rng::stream(config.seed, Stream::WeatherSelection);
    train_with(
        config,
        initial,
        |_| {
            let year = sample_training_year(pool, &mut weather_rng)?;
            CropEnv::reset(env_config, year)
        },
        observer,
    )
}

/// Replicated test of a fixed policy on one season.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 when `sd_defined` is false.
    pub sd: f64,
    pub sd_defined: bool,
    pub traces: Vec<EpisodeTrace>,
}

/// Sample mean and (n - 1) standard deviation, summed in order.
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Runs `replicates` episodes of `params` on `weather`; replicate `i` samples actions
/// from the stream seeded with `base_seed ^ i`.
pub fn evaluate(
    params: &PolicyParameters,
    env_config: &EnvConfig,
    weather: &WeatherYear,
    replicates: usize,
    base_seed: u64,
) -> Result<Evaluation> {
    if replicates == 0 {
        return Err(Error::domain("replicates must be >= 1"));
    }
    let traces = (0..replicates)
        .map(|i| {
            let mut r = rng::replicate(base_seed, i as u64);
            let mut env = CropEnv::reset(env_config, weather)?;
            run_episode(&mut env, params, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(traces))
}

/// Mean and sd of trace profits, in trace order.
pub fn summarize(traces: Vec<EpisodeTrace>) -> Evaluation {
    let profits: Vec<f64> = traces.iter().map(|t| t.profit).collect();
    let (mean, sd) = mean_sd(&profits);
    Evaluation {
        mean,
        sd: sd.unwrap_or(0.0),
        sd_defined: sd.is_some(),
        traces,
    }
}

/// Best schedule found for one season.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub year_id: i32,
    pub best_profit: f64,
    pub best_actions: Vec<usize>,
    /// Day of year of each action in `best_actions`.
    pub best_days: Vec<u32>,
    /// 0 for the all-zero seed schedule, otherwise the 1-based search episode.
    pub best_episode: usize,
    pub zero_profit: f64,
    pub episodes_used: usize,
    /// Best profit so far after each search episode.
    pub best_so_far: Vec<f64>,
}

/// Every `EXPLORE_EVERY`-th search episode follows a random schedule instead of π_θ.
pub const EXPLORE_EVERY: usize = 10;

/// Upper-bound search on a single season: REINFORCE on that season alone for
/// `budget` episodes, every tenth replaced by a random schedule, seeded with the
/// all-zero schedule. Returns the most profitable episode ever seen.
pub fn benchmark_search(
    weather: &WeatherYear,
    budget: usize,
    config: &TrainConfig,
    env_config: &EnvConfig,
    arch: &Architecture,
    scaling: Option<InputScaling>,
) -> Result<Benchmark> {
    if budget == 0 {
        return Err(Error::domain("benchmark budget must be >= 1"));
    }
    config.validate()?;
    let zero = crate::cropsim::run_schedule(env_config, weather, |_, _| 0)?;
    let sowing = CropEnv::reset(env_config, weather)?.day_of_year();
    let mut best = Benchmark {
        year_id: weather.year_id,
        best_profit: zero.profit,
        best_actions: vec![0; zero.rewards.len()],
        best_days: (0..zero.rewards.len() as u32).map(|t| sowing + t).collect(),
        best_episode: 0,
        zero_profit: zero.profit,
        episodes_used: budget,
        best_so_far: Vec::with_capacity(budget),
    };

    let key = |s: Stream| ((s as u64) << 32) | u64::from(weather.year_id as u32);
    let mut init_rng = rng::with_id(config.seed, key(Stream::Init));
    let mut action_rng = rng::with_id(config.seed, key(Stream::Benchmark));
    let mut explore_rng = rng::with_id(config.seed, key(Stream::Exploration));
    let mut params = init_parameters(arch, &mut init_rng, config.init_scale)?.with_scaling(scaling)?;
    let options = config.update_options();
    let n_actions = env_config.actions.len();

    for k in 1..=budget {
        let mut env = CropEnv::reset(env_config, weather)?;
        let (profit, actions, days) = if k % EXPLORE_EVERY == 0 {
            // random schedule: irrigate on a random fraction of days with random amounts
            let rate: f64 = explore_rng.random_range(0.0..0.5);
            let mut actions = Vec::new();
            let mut days = Vec::new();
            let mut profit = 0.0;
            while !env.is_done() {
                days.push(env.day_of_year());
                let a = if explore_rng.random::<f64>() < rate {
                    explore_rng.random_range(1..n_actions.max(2)).min(n_actions - 1)
                } else {
                    0
                };
                actions.push(a);
                profit += env.advance(a)?.reward;
            }
            (profit, actions, days)
        } else {
            let trace = run_episode(&mut env, &params, &mut action_rng)?;
            reinforce_episode_update(&mut params, &trace, config.alpha, options).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("benchmark {} episode {k}, {m}", weather.year_id)),
                other => other,
            })?;
            let days = trace.steps.iter().map(|s| s.day_of_year).collect();
            (trace.profit, trace.action_indices(), days)
        };
        if profit > best.best_profit {
            best.best_profit = profit;
            best.best_actions = actions;
            best.best_days = days;
            best.best_episode = k;
        }
        best.best_so_far.push(best.best_profit);
    }
    Ok(best)
}

/// Profit of replaying a benchmark schedule.
pub fn replay_benchmark(best: &Benchmark, env_config: &EnvConfig, weather: &WeatherYear) -> Result<f64> {
    Ok(replay_actions(env_config, weather, &best.best_actions)?.profit)
}
