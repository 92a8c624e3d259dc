//! Fixed calendar schedules used as reference strategies.

use crate::cropsim::{run_schedule, EnvConfig, Replay};
use crate::error::{Error, Result};
use crate::weather::WeatherYear;

/// Irrigate `action_index` every `interval_days` days, starting `start_day` days
/// after sowing; no irrigation otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedSchedule {
    pub action_index: usize,
    pub interval_days: usize,
    pub start_day: usize,
}

impl FixedSchedule {
    pub const NONE: FixedSchedule = FixedSchedule {
        action_index: 0,
        interval_days: 1,
        start_day: 0,
    };

    pub fn action_at(&self, t: usize) -> usize {
        if t.checked_sub(self.start_day).is_some_and(|d| d.is_multiple_of(self.interval_days)) {
            self.action_index
        } else {
            0
        }
    }

    pub fn run(&self, config: &EnvConfig, weather: &WeatherYear) -> Result<Replay> {
        if self.interval_days == 0 {
            return Err(Error::domain("schedule interval must be >= 1"));
        }
        run_schedule(config, weather, |t, _| self.action_at(t))
    }
}

impl std::fmt::Display for FixedSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "action {} every {} d from day {}",
            self.action_index, self.interval_days, self.start_day
        )
    }
}

/// The 27 grid schedules: amounts {10, 20, 40} mm × intervals {3, 7, 14} d × start
/// {0, 30, 60} d after sowing, for the default action set.
pub fn schedule_grid() -> Vec<FixedSchedule> {
    let mut out = Vec::with_capacity(27);
    for action_index in [1, 2, 4] {
        for interval_days in [3, 7, 14] {
            for start_day in [0, 30, 60] {
                out.push(FixedSchedule {
                    action_index,
                    interval_days,
                    start_day,
                });
            }
        }
    }
    out
}

/// Mean profit of `schedule` over `years`.
pub fn mean_profit(schedule: &FixedSchedule, config: &EnvConfig, years: &[&WeatherYear]) -> Result<f64> {
    if years.is_empty() {
        return Err(Error::domain("no seasons to average over"));
    }
    let mut total = 0.0;
    for w in years {
        total += schedule.run(config, w)?.profit;
    }
    Ok(total / years.len() as f64)
}

/// Best grid schedule by mean profit over `years`, ties to the earlier grid entry.
pub fn best_grid_schedule(config: &EnvConfig, years: &[&WeatherYear]) -> Result<(FixedSchedule, f64)> {
    let mut best: Option<(FixedSchedule, f64)> = None;
    for s in schedule_grid() {
        let m = mean_profit(&s, config, years)?;
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((s, m));
        }
    }
    Ok(best.expect("grid is non-empty"))
}
