//! Surrogate irrigated-wheat environment.
//!
//! A daily soil water balance over a layered profile coupled to a simple crop. One
//! episode runs from sowing until the crop reaches `stage_end`. The state exposes the
//! top five layers; the profile below them still stores and drains water.

pub mod crop;
pub mod soil;

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Transition};
use crate::episode::{step_reward, ActionSet, EconomicConfig, StateVector, Termination, MONITORED_LAYERS};
use crate::error::{Error, Result};
use crate::weather::{WeatherDay, WeatherYear};

pub use crop::{CropParams, CropState};
pub use soil::{SoilLayer, SoilProfile, UptakeParams, WaterStress};

/// A calendar day without a year, written `MM-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonthDay {
    pub month: u32,
    pub day: u32,
}

impl MonthDay {
    pub const fn new(month: u32, day: u32) -> Self {
        MonthDay { month, day }
    }

    pub fn in_year(&self, year: i32) -> Result<NaiveDate> {
        NaiveDate::from_ymd_opt(year, self.month, self.day)
            .ok_or_else(|| Error::domain(format!("{self} does not exist in {year}")))
    }
}

impl fmt::Display for MonthDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}-{:02}", self.month, self.day)
    }
}

impl FromStr for MonthDay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("expected MM-DD, got {s:?}"));
        let (m, d) = s.split_once('-').ok_or_else(bad)?;
        let md = MonthDay::new(m.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?);
        // 2000 is a leap year, so 02-29 is accepted here
        md.in_year(2000).map_err(|_| bad())?;
        Ok(md)
    }
}

impl Serialize for MonthDay {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthDay {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Soil table as CSV (`depth_top_cm,depth_bottom_cm,dul,cll,bd`).
    pub soil: SoilProfile,
    /// Initial water as a fraction of PAWC in every layer.
    pub initial_pawc_fraction: f64,
    pub sowing_window_start: MonthDay,
    pub sowing_window_end: MonthDay,
    /// Days of trailing rain examined by the sowing trigger.
    pub sowing_rain_days: u32,
    /// Trailing rain (mm) that triggers sowing.
    pub sowing_rain_mm: f64,
    /// Water applied when sowing is forced at the end of the window (not counted as irrigation).
    pub forced_sowing_irrigation: f64,
    pub stage_end: f64,
    pub max_days: u32,
    pub crop: CropParams,
    pub uptake: UptakeParams,
    pub econ: EconomicConfig,
    pub actions: ActionSet,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            soil: SoilProfile::thallon(),
            initial_pawc_fraction: 0.20,
            sowing_window_start: MonthDay::new(4, 25),
            sowing_window_end: MonthDay::new(6, 1),
            sowing_rain_days: 3,
            sowing_rain_mm: 15.0,
            forced_sowing_irrigation: 20.0,
            stage_end: 85.0,
            max_days: 220,
            crop: CropParams::default(),
            uptake: UptakeParams::default(),
            econ: EconomicConfig::default(),
            actions: ActionSet::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.initial_pawc_fraction) {
            return Err(Error::domain("initial_pawc_fraction must be in [0, 1]"));
        }
        if !(self.stage_end > 5.0) {
            return Err(Error::domain("stage_end must exceed 5"));
        }
        if self.max_days == 0 {
            return Err(Error::domain("max_days must be >= 1"));
        }
        if self.sowing_window_end < self.sowing_window_start {
            return Err(Error::domain("sowing window ends before it starts"));
        }
        if self.soil.layers().len() < MONITORED_LAYERS {
            return Err(Error::domain(format!(
                "soil profile needs at least {MONITORED_LAYERS} layers"
            )));
        }
        if self.forced_sowing_irrigation < 0.0 || self.sowing_rain_mm < 0.0 {
            return Err(Error::domain("sowing water amounts must be >= 0"));
        }
        self.crop.validate()?;
        self.econ.validate()
    }
}

/// Reference evapotranspiration, mm/day (radiation form of Hargreaves).
pub fn reference_et(day: &WeatherDay) -> f64 {
    (0.0135 * (day.tmean() + 17.78) * day.radn * 0.408).max(0.0)
}

/// Water fluxes of one simulated day, all in mm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DayBalance {
    pub rain: f64,
    pub irrigation: f64,
    pub evaporation: f64,
    pub transpiration: f64,
    pub drainage: f64,
    pub storage_before: f64,
    pub storage_after: f64,
    pub stress: f64,
}

impl DayBalance {
    /// `Δstorage - (inputs - outputs)`; zero up to rounding.
    pub fn residual(&self) -> f64 {
        (self.storage_after - self.storage_before)
            - (self.rain + self.irrigation - self.evaporation - self.transpiration - self.drainage)
    }
}

/// How the season was started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sowing {
    pub date: NaiveDate,
    pub day_of_year: u32,
    pub forced: bool,
    /// Water applied with a forced sowing (mm), before the first decision.
    pub pre_sowing_water: f64,
}

/// First day of the window whose trailing rain reaches the threshold, or a forced
/// sowing on the last day of the window.
pub fn sowing_date(config: &EnvConfig, weather: &WeatherYear) -> Result<Sowing> {
    let year = weather.first_date().year();
    let start = config.sowing_window_start.in_year(year)?;
    let end = config.sowing_window_end.in_year(year)?;
    if !weather.covers(start, end) {
        return Err(Error::domain(format!(
            "weather year {} does not cover the sowing window {start}..{end}",
            weather.year_id
        )));
    }
    let days = weather.days();
    let first = weather.index_of(start).expect("covered");
    let last = weather.index_of(end).expect("covered");
    let lookback = config.sowing_rain_days as usize;
    for i in first..=last {
        let from = i.saturating_sub(lookback);
        let trailing: f64 = days[from..i].iter().map(|d| d.rain).sum();
        if trailing >= config.sowing_rain_mm {
            return Ok(Sowing {
                date: days[i].date,
                day_of_year: days[i].date.ordinal(),
                forced: false,
                pre_sowing_water: 0.0,
            });
        }
    }
    Ok(Sowing {
        date: end,
        day_of_year: end.ordinal(),
        forced: true,
        pre_sowing_water: config.forced_sowing_irrigation,
    })
}

/// One season in progress. Deterministic given the weather and the action sequence.
#[derive(Debug, Clone)]
pub struct CropEnv<'a> {
    config: &'a EnvConfig,
    weather: &'a WeatherYear,
    sowing: Sowing,
    /// Index into the weather series of the current day.
    day_index: usize,
    days_elapsed: u32,
    soil: SoilProfile,
    crop: CropState,
    cu_irrig: f64,
    cu_rain: f64,
    last_balance: Option<DayBalance>,
    termination: Option<Termination>,
    final_yield: Option<f64>,
}

impl<'a> CropEnv<'a> {
    /// Initialises the soil, finds the sowing day and positions the episode there.
    pub fn reset(config: &'a EnvConfig, weather: &'a WeatherYear) -> Result<Self> {
        config.validate()?;
        let sowing = sowing_date(config, weather)?;
        let mut soil = config.soil.clone();
        soil.fill_fraction(config.initial_pawc_fraction);
        if sowing.pre_sowing_water > 0.0 {
            soil::infiltrate_and_drain(&mut soil, sowing.pre_sowing_water);
        }
        let day_index = weather.index_of(sowing.date).expect("sowing inside weather");
        Ok(CropEnv {
            config,
            weather,
            sowing,
            day_index,
            days_elapsed: 0,
            soil,
            crop: CropState::at_sowing(&config.crop),
            cu_irrig: 0.0,
            cu_rain: 0.0,
            last_balance: None,
            termination: None,
            final_yield: None,
        })
    }

    pub fn sowing(&self) -> Sowing {
        self.sowing
    }

    pub fn soil(&self) -> &SoilProfile {
        &self.soil
    }

    pub fn crop(&self) -> &CropState {
        &self.crop
    }

    pub fn config(&self) -> &EnvConfig {
        self.config
    }

    pub fn days_elapsed(&self) -> u32 {
        self.days_elapsed
    }

    /// Water balance of the most recent step.
    pub fn last_balance(&self) -> Option<&DayBalance> {
        self.last_balance.as_ref()
    }

    pub fn observe(&self) -> StateVector {
        let mut esw = [0.0; MONITORED_LAYERS];
        for (slot, layer) in esw.iter_mut().zip(self.soil.layers()) {
            *slot = layer.esw_mm();
        }
        StateVector {
            stage: self.crop.stage,
            lai: self.crop.lai,
            esw,
            cu_irrig: self.cu_irrig,
            cu_rain: self.cu_rain,
        }
    }

    /// Simulates the current day with `action_index` applied and moves to the next.
    pub fn advance(&mut self, action_index: usize) -> Result<Transition> {
        if self.termination.is_some() {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let irrigation = self.config.actions.amount(action_index)?;
        let day = self.weather.days()[self.day_index];
        let params = &self.config.crop;
        let storage_before = self.soil.storage_mm();

        let drainage = soil::infiltrate_and_drain(&mut self.soil, day.rain + irrigation);
        let et0 = reference_et(&day);
        let evaporation = soil::evaporate(
            &mut self.soil,
            et0,
            self.crop.lai,
            params.soil_evap_coeff,
            params.soil_evap_extinction,
        );
        let stress = soil::daily_water_stress(
            &self.soil,
            self.crop.lai,
            self.crop.root_depth_mm,
            et0,
            &self.config.uptake,
        );
        let transpiration = soil::extract(&mut self.soil, &stress.extraction);

        let lai_today = self.crop.lai;
        self.crop = crop::advance_phenology(&self.crop, day.tmean(), stress.factor, params);
        crop::accrue_biomass(&mut self.crop, lai_today, day.radn, stress.factor, params);
        crop::update_lai(&mut self.crop, stress.factor, params);
        crop::record_stress(&mut self.crop, stress.factor, params);
        crop::grow_roots(&mut self.crop, params);

        self.cu_rain += day.rain;
        self.cu_irrig += irrigation;
        self.days_elapsed += 1;
        self.day_index += 1;
        self.last_balance = Some(DayBalance {
            rain: day.rain,
            irrigation,
            evaporation,
            transpiration,
            drainage,
            storage_before,
            storage_after: self.soil.storage_mm(),
            stress: stress.factor,
        });

        // stage wins a same-day tie with the other limits
        self.termination = if self.crop.stage >= self.config.stage_end {
            Some(Termination::StageReached)
        } else if self.days_elapsed >= self.config.max_days {
            Some(Termination::MaxDays)
        } else if self.day_index >= self.weather.days().len() {
            Some(Termination::WeatherExhausted)
        } else {
            None
        };
        let done = self.termination.is_some();
        let terminal_yield = if done {
            let y = crop::compute_yield(&self.crop, params);
            self.final_yield = Some(y);
            Some(y)
        } else {
            None
        };
        let reward = step_reward(irrigation, terminal_yield, &self.config.econ)?;
        Ok(Transition {
            state: self.observe(),
            reward,
            done,
        })
    }
}

impl Environment for CropEnv<'_> {
    fn state(&self) -> StateVector {
        self.observe()
    }

    fn step(&mut self, action_index: usize) -> Result<Transition> {
        self.advance(action_index)
    }

    fn num_actions(&self) -> usize {
        self.config.actions.len()
    }

    fn is_done(&self) -> bool {
        self.termination.is_some()
    }

    fn day_of_year(&self) -> u32 {
        self.weather
            .days()
            .get(self.day_index)
            .map(|d| d.date.ordinal())
            .unwrap_or_else(|| self.weather.last_date().ordinal() + 1)
    }

    fn final_yield(&self) -> Option<f64> {
        self.final_yield
    }

    fn termination(&self) -> Option<Termination> {
        self.termination
    }

    fn episode_id(&self) -> i32 {
        self.weather.year_id
    }
}

/// Result of replaying a fixed action sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub rewards: Vec<f64>,
    pub states: Vec<StateVector>,
    pub profit: f64,
    pub yield_kg_ha: f64,
    pub termination: Termination,
}

/// Runs an episode with actions taken from `choose(step, state)` until done.
pub fn run_schedule(
    config: &EnvConfig,
    weather: &WeatherYear,
    mut choose: impl FnMut(usize, &StateVector) -> usize,
) -> Result<Replay> {
    let mut env = CropEnv::reset(config, weather)?;
    let mut rewards = Vec::new();
    let mut states = Vec::new();
    while !env.is_done() {
        let s = env.observe();
        let a = choose(rewards.len(), &s);
        states.push(s);
        rewards.push(env.advance(a)?.reward);
    }
    Ok(Replay {
        profit: rewards.iter().sum(),
        rewards,
        states,
        yield_kg_ha: env.final_yield.unwrap_or(0.0),
        termination: env.termination.expect("done"),
    })
}

/// Replays recorded action indices. Extra actions after termination are an error;
/// running out of actions before termination is an error too.
pub fn replay_actions(config: &EnvConfig, weather: &WeatherYear, actions: &[usize]) -> Result<Replay> {
    let mut env = CropEnv::reset(config, weather)?;
    let mut rewards = Vec::with_capacity(actions.len());
    let mut states = Vec::with_capacity(actions.len());
    for &a in actions {
        if env.is_done() {
            return Err(Error::domain(format!(
                "schedule has {} actions but the episode ended after {}",
                actions.len(),
                rewards.len()
            )));
        }
        states.push(env.observe());
        rewards.push(env.advance(a)?.reward);
    }
    if !env.is_done() {
        return Err(Error::domain(format!(
            "schedule of {} actions ended before the episode terminated",
            actions.len()
        )));
    }
    Ok(Replay {
        profit: rewards.iter().sum(),
        rewards,
        states,
        yield_kg_ha: env.final_yield.unwrap_or(0.0),
        termination: env.termination.expect("done"),
    })
}
