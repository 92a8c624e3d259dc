//! Daily weather series, one file per season, and uniform year selection for training.
//!
//! File format: UTF-8 CSV with header `date,rain,tmax,tmin,radn`, ISO-8601 dates,
//! consecutive days, one file per year named `<year>.csv`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 5] = ["date", "rain", "tmax", "tmin", "radn"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherDay {
    pub date: NaiveDate,
    /// mm
    pub rain: f64,
    /// °C
    pub tmax: f64,
    /// °C
    pub tmin: f64,
    /// MJ/m²/day
    pub radn: f64,
}

impl WeatherDay {
    pub fn tmean(&self) -> f64 {
        0.5 * (self.tmax + self.tmin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherYear {
    pub year_id: i32,
    days: Vec<WeatherDay>,
}

impl WeatherYear {
    /// Validates field ranges and day-by-day contiguity.
    pub fn new(year_id: i32, days: Vec<WeatherDay>) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::domain(format!("weather year {year_id} has no days")));
        }
        for (i, d) in days.iter().enumerate() {
            // rows start on line 2, after the header
            let line = i as u64 + 2;
            check_day(d, line)?;
            if i > 0 {
                let prev = days[i - 1].date;
                if prev.succ_opt() != Some(d.date) {
                    return Err(gap_error(prev, d.date, line));
                }
            }
        }
        Ok(WeatherYear { year_id, days })
    }

    pub fn days(&self) -> &[WeatherDay] {
        &self.days
    }

    pub fn first_date(&self) -> NaiveDate {
        self.days[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.days[self.days.len() - 1].date
    }

    /// Position of `date` in the series, if covered.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.first_date()).num_days();
        if offset < 0 || offset as usize >= self.days.len() {
            None
        } else {
            Some(offset as usize)
        }
    }

    pub fn covers(&self, from: NaiveDate, to: NaiveDate) -> bool {
        self.first_date() <= from && to <= self.last_date()
    }

    /// Season rainfall between two dates, inclusive.
    pub fn rain_between(&self, from: NaiveDate, to: NaiveDate) -> f64 {
        self.days
            .iter()
            .filter(|d| d.date >= from && d.date <= to)
            .map(|d| d.rain)
            .sum()
    }
}

fn check_day(d: &WeatherDay, line: u64) -> Result<()> {
    let bad = |field: &str, message: String| Error::WeatherParse {
        line,
        field: field.to_string(),
        message,
    };
    for (name, v) in [
        ("rain", d.rain),
        ("tmax", d.tmax),
        ("tmin", d.tmin),
        ("radn", d.radn),
    ] {
        if !v.is_finite() {
            return Err(bad(name, format!("{v} is not finite")));
        }
    }
    if d.rain < 0.0 {
        return Err(bad("rain", format!("negative rain {}", d.rain)));
    }
    if d.radn < 0.0 {
        return Err(bad("radn", format!("negative radiation {}", d.radn)));
    }
    if d.tmax < d.tmin {
        return Err(bad(
            "tmax",
            format!("tmax {} below tmin {}", d.tmax, d.tmin),
        ));
    }
    Ok(())
}

fn gap_error(prev: NaiveDate, got: NaiveDate, line: u64) -> Error {
    let expected = prev.succ_opt().unwrap_or(prev);
    Error::WeatherParse {
        line,
        field: "date".into(),
        message: if got <= prev {
            format!("date {got} does not follow {prev}")
        } else {
            format!("gap: missing {expected} (next row is {got})")
        },
    }
}

/// Parses one season from CSV. The year id is the calendar year of the first row.
pub fn parse_weather<R: Read>(reader: R) -> Result<WeatherYear> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(1, "header", e.to_string()))?
        .clone();
    let mut cols = [0usize; 5];
    for (k, name) in HEADER.iter().enumerate() {
        cols[k] = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_error(1, name, "missing column".into()))?;
    }

    let mut days: Vec<WeatherDay> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, "row", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<&str> {
            record
                .get(cols[k])
                .ok_or_else(|| parse_error(line, HEADER[k], "missing value".into()))
        };
        let date = NaiveDate::parse_from_str(field(0)?, "%Y-%m-%d")
            .map_err(|e| parse_error(line, "date", format!("{e}: {:?}", field(0).unwrap_or(""))))?;
        let num = |k: usize| -> Result<f64> {
            let raw = field(k)?;
            raw.parse::<f64>()
                .map_err(|_| parse_error(line, HEADER[k], format!("not a number: {raw:?}")))
        };
        let day = WeatherDay {
            date,
            rain: num(1)?,
            tmax: num(2)?,
            tmin: num(3)?,
            radn: num(4)?,
        };
        check_day(&day, line)?;
        if let Some(prev) = days.last() {
            if prev.date.succ_opt() != Some(date) {
                return Err(gap_error(prev.date, date, line));
            }
        }
        days.push(day);
    }
    let first = days
        .first()
        .ok_or_else(|| parse_error(2, "row", "no data rows".into()))?;
    let year_id = first.date.year();
    Ok(WeatherYear { year_id, days })
}

fn parse_error(line: u64, field: &str, message: String) -> Error {
    Error::WeatherParse {
        line,
        field: field.to_string(),
        message,
    }
}

/// Parses a weather file. A numeric file stem (`1981.csv`) overrides the year id.
pub fn parse_weather_file(path: impl AsRef<Path>) -> Result<WeatherYear> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut year = parse_weather(file).map_err(|e| match e {
        Error::WeatherParse {
            line,
            field,
            message,
        } => Error::WeatherParse {
            line,
            field,
            message: format!("{message} (in {})", path.display()),
        },
        other => other,
    })?;
    if let Some(id) = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse::<i32>().ok())
    {
        year.year_id = id;
    }
    Ok(year)
}

pub fn write_weather<W: Write>(year: &WeatherYear, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let to_io = |e: csv::Error| Error::io("<weather csv>", e.into());
    w.write_record(HEADER).map_err(to_io)?;
    for d in &year.days {
        w.write_record([
            d.date.format("%Y-%m-%d").to_string(),
            d.rain.to_string(),
            d.tmax.to_string(),
            d.tmin.to_string(),
            d.radn.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io("<weather csv>", e))?;
    Ok(())
}

/// Writes `<dir>/<year_id>.csv`.
pub fn write_weather_file(year: &WeatherYear, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let path = dir.as_ref().join(format!("{}.csv", year.year_id));
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_weather(year, std::io::BufWriter::new(file))?;
    Ok(path)
}

/// Loads every `*.csv` in a directory, sorted by year id.
pub fn load_weather_dir(dir: impl AsRef<Path>) -> Result<Vec<WeatherYear>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut years = paths
        .iter()
        .map(parse_weather_file)
        .collect::<Result<Vec<_>>>()?;
    years.sort_by_key(|y| y.year_id);
    if years.is_empty() {
        return Err(Error::domain(format!(
            "no weather files (*.csv) in {}",
            dir.display()
        )));
    }
    Ok(years)
}

/// The set of seasons sampled from during training.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherPool {
    years: Vec<WeatherYear>,
}

impl WeatherPool {
    pub fn new(years: Vec<WeatherYear>) -> Result<Self> {
        if years.is_empty() {
            return Err(Error::domain("weather pool is empty"));
        }
        let mut ids: Vec<i32> = years.iter().map(|y| y.year_id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::domain(format!("duplicate year id {}", w[0])));
        }
        Ok(WeatherPool { years })
    }

    pub fn years(&self) -> &[WeatherYear] {
        &self.years
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }
}

/// Draws one season uniformly at random.
pub fn sample_training_year<'a, R: Rng + ?Sized>(
    pool: &'a WeatherPool,
    rng: &mut R,
) -> Result<&'a WeatherYear> {
    if pool.years.is_empty() {
        return Err(Error::domain("cannot sample from an empty weather pool"));
    }
    let i = rng.random_range(0..pool.years.len());
    Ok(&pool.years[i])
}
