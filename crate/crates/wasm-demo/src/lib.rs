//! Browser bindings for the demo page: fixed-schedule seasons, an in-browser
//! training run and the trained policy's action probabilities.
//!
//! The logic lives in plain functions returning JSON strings so it can be tested
//! natively; the `#[wasm_bindgen]` layer only converts errors.

use irrl_core::baseline::FixedSchedule;
use irrl_core::cropsim::{run_schedule, Replay};
use irrl_core::learner::{initial_parameters, moving_average, train_with, TrainConfig};
use irrl_core::policy::{forward, Architecture, InputScaling};
use irrl_core::rng::{self, SimRng, Stream};
use irrl_core::synthetic::synthetic_year;
use irrl_core::weather::sample_training_year;
use irrl_core::{CropEnv, EnvConfig, PolicyParameters, StateVector, WeatherPool, WeatherYear};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const FIRST_TRAIN_YEAR: i32 = 1981;
const TRAIN_YEARS: usize = 10;
const MA_ORDER: usize = 100;

#[derive(Serialize)]
struct Season {
    year: i32,
    profit: f64,
    yield_kg_ha: f64,
    days: Vec<DayOut>,
}

#[derive(Serialize)]
struct DayOut {
    stage: f64,
    lai: f64,
    esw: f64,
    cu_irrig: f64,
    cu_rain: f64,
    irrigation: f64,
}

fn season_json(config: &EnvConfig, weather: &WeatherYear, replay: &Replay, actions: &[usize]) -> String {
    let days = replay
        .states
        .iter()
        .zip(actions)
        .map(|(s, &a)| DayOut {
            stage: s.stage,
            lai: s.lai,
            esw: s.esw.iter().sum(),
            cu_irrig: s.cu_irrig,
            cu_rain: s.cu_rain,
            irrigation: config.actions.amounts()[a],
        })
        .collect();
    serde_json::to_string(&Season {
        year: weather.year_id,
        profit: replay.profit,
        yield_kg_ha: replay.yield_kg_ha,
        days,
    })
    .expect("season serializes")
}

/// One season of synthetic weather under "apply action `action_index` every
/// `interval_days` days starting on day `start_day`".
pub fn simulate_schedule_json(
    year: i32,
    weather_seed: u64,
    action_index: usize,
    interval_days: usize,
    start_day: usize,
) -> Result<String, String> {
    let config = EnvConfig::default();
    if action_index >= config.actions.len() {
        return Err(format!("action index {action_index} out of range"));
    }
    let schedule = FixedSchedule {
        action_index,
        interval_days: interval_days.max(1),
        start_day,
    };
    let weather = synthetic_year(year, weather_seed);
    let mut actions = Vec::new();
    let replay = run_schedule(&config, &weather, |t, _| {
        let a = schedule.action_at(t);
        actions.push(a);
        a
    })
    .map_err(|e| e.to_string())?;
    Ok(season_json(&config, &weather, &replay, &actions))
}

#[wasm_bindgen]
pub fn simulate_schedule(
    year: i32,
    weather_seed: u32,
    action_index: u32,
    interval_days: u32,
    start_day: u32,
) -> Result<String, JsValue> {
    simulate_schedule_json(
        year,
        weather_seed as u64,
        action_index as usize,
        interval_days as usize,
        start_day as usize,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[derive(Serialize)]
struct Curve<'a> {
    episodes: usize,
    profits: &'a [f64],
    moving_average: Vec<f64>,
}

/// A linear softmax policy trained in chunks on ten synthetic seasons.
#[wasm_bindgen]
pub struct Trainer {
    env: EnvConfig,
    pool: WeatherPool,
    params: PolicyParameters,
    config: TrainConfig,
    weather_rng: SimRng,
    profits: Vec<f64>,
    chunks: u64,
}

impl Trainer {
    pub fn create(seed: u64, alpha: f64) -> Result<Trainer, String> {
        let config = TrainConfig {
            alpha,
            seed,
            init_scale: 0.1,
            frozen_theta_gradients: true,
            ..TrainConfig::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        let years = (0..TRAIN_YEARS as i32).map(|i| synthetic_year(FIRST_TRAIN_YEAR + i, seed)).collect();
        let params = initial_parameters(&config, &Architecture::new(vec![]), Some(InputScaling::centered()))
            .map_err(|e| e.to_string())?;
        Ok(Trainer {
            env: EnvConfig::default(),
            pool: WeatherPool::new(years).map_err(|e| e.to_string())?,
            params,
            weather_rng: rng::stream(seed, Stream::WeatherSelection),
            config,
            profits: Vec::new(),
            chunks: 0,
        })
    }

    /// Runs `episodes` more episodes and returns the whole learning curve.
    pub fn train_json(&mut self, episodes: usize) -> Result<String, String> {
        if episodes > 0 {
            // each chunk gets its own action stream so chunked runs stay reproducible
            let chunk = TrainConfig {
                episodes_n: episodes,
                seed: self.config.seed.wrapping_add(self.chunks << 32),
                ..self.config.clone()
            };
            let (env, pool, weather_rng) = (&self.env, &self.pool, &mut self.weather_rng);
            let out = train_with(
                &chunk,
                self.params.clone(),
                |_| CropEnv::reset(env, sample_training_year(pool, weather_rng)?),
                |_, _| {},
            )
            .map_err(|e| e.to_string())?;
            self.profits.extend(out.log.profits());
            self.params = out.last;
            self.chunks += 1;
        }
        let curve = Curve {
            episodes: self.profits.len(),
            profits: &self.profits,
            moving_average: moving_average(&self.profits, MA_ORDER).map_err(|e| e.to_string())?,
        };
        Ok(serde_json::to_string(&curve).expect("curve serializes"))
    }

    /// Action probabilities for a state given as `[stage, lai, esw1..esw5, cu_irrig, cu_rain]`.
    pub fn probabilities_json(&self, state: &[f64]) -> Result<String, String> {
        let s = StateVector::from_slice(state).map_err(|e| e.to_string())?;
        let probs = forward(&self.params, &s).map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&probs).expect("probabilities serialize"))
    }
}

#[wasm_bindgen]
impl Trainer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, alpha: f64) -> Result<Trainer, JsValue> {
        Trainer::create(seed as u64, alpha).map_err(|e| JsValue::from_str(&e))
    }

    pub fn train(&mut self, episodes: u32) -> Result<String, JsValue> {
        self.train_json(episodes as usize).map_err(|e| JsValue::from_str(&e))
    }

    pub fn probabilities(&self, state: &[f64]) -> Result<String, JsValue> {
        self.probabilities_json(state).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn episodes(&self) -> usize {
        self.profits.len()
    }
}
