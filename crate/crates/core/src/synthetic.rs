//! Seeded stochastic weather for tests, demos and desk-scale experiments.
//!
//! The climate loosely follows a subtropical winter-cropping site: a warm wet summer,
//! a cool dry winter, and a per-year rainfall multiplier so that seasons range from
//! dry to wet. Values are rounded to one decimal like station records.

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::Result;
use crate::rng::{self, SimRng};
use crate::weather::{WeatherDay, WeatherPool, WeatherYear};

/// Mean monthly rainfall (mm), January first.
const MONTHLY_RAIN: [f64; 12] = [
    80.0, 75.0, 55.0, 35.0, 40.0, 35.0, 30.0, 25.0, 30.0, 50.0, 65.0, 80.0,
];
/// Probability that a day is wet, by month.
const WET_PROB: [f64; 12] = [
    0.24, 0.24, 0.2, 0.14, 0.15, 0.15, 0.14, 0.12, 0.13, 0.17, 0.2, 0.23,
];
const DAYS_IN_MONTH: [f64; 12] = [
    31.0, 28.25, 31.0, 30.0, 31.0, 30.0, 31.0, 31.0, 30.0, 31.0, 30.0, 31.0,
];

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// One calendar year of synthetic weather for `year_id`, fully determined by `seed`.
pub fn synthetic_year(year_id: i32, seed: u64) -> WeatherYear {
    let stream_id = ((rng::Stream::SyntheticWeather as u64) << 32) | (year_id as u32 as u64);
    let mut r: SimRng = rng::with_id(seed, stream_id);

    // lognormal season multiplier: some years are markedly drier or wetter
    let z: f64 = StandardNormal.sample(&mut r);
    let wetness = (0.45 * z - 0.1).exp();

    let start = NaiveDate::from_ymd_opt(year_id, 1, 1).expect("valid year");
    let end = NaiveDate::from_ymd_opt(year_id, 12, 31).expect("valid year");
    let mut days = Vec::with_capacity(366);
    let mut date = start;
    let mut wet_yesterday = false;
    while date <= end {
        let m = date.month0() as usize;
        let phase = 2.0 * std::f64::consts::PI * (date.ordinal() as f64 - 15.0) / 365.25;
        let season = phase.cos();

        let p = WET_PROB[m];
        // persistence: wet days cluster
        let p_today = if wet_yesterday { (p * 2.2).min(0.7) } else { p * 0.8 };
        let wet = r.random::<f64>() < p_today;
        let mean_amount = MONTHLY_RAIN[m] / (DAYS_IN_MONTH[m] * p);
        let rain = if wet {
            let e: f64 = Exp1.sample(&mut r);
            round1(e * mean_amount * wetness)
        } else {
            0.0
        };
        wet_yesterday = wet;

        let n1: f64 = StandardNormal.sample(&mut r);
        let n2: f64 = StandardNormal.sample(&mut r);
        let n3: f64 = StandardNormal.sample(&mut r);
        let cloud = if rain > 0.0 { 0.65 } else { 1.0 };
        let tmax = round1(24.0 + 7.5 * season + 2.2 * n1 - if wet { 2.0 } else { 0.0 });
        let tmin_raw = round1(10.5 + 8.0 * season + 2.0 * n2);
        let tmin = tmin_raw.min(round1(tmax - 1.0));
        let radn = round1(((20.0 + 6.5 * season) * cloud + 1.5 * n3).clamp(3.0, 33.0));
        days.push(WeatherDay {
            date,
            rain,
            tmax,
            tmin,
            radn,
        });
        date = date.succ_opt().expect("date in range");
    }
    WeatherYear::new(year_id, days).expect("synthetic weather satisfies invariants")
}

/// `count` consecutive synthetic years starting at `first_year`.
pub fn synthetic_years(first_year: i32, count: usize, seed: u64) -> Vec<WeatherYear> {
    (0..count as i32)
        .map(|k| synthetic_year(first_year + k, seed))
        .collect()
}

pub fn synthetic_pool(first_year: i32, count: usize, seed: u64) -> Result<WeatherPool> {
    WeatherPool::new(synthetic_years(first_year, count, seed))
}
