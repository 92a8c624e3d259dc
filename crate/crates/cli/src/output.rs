//! CSV outputs and the readers that parse them back.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use irrl_core::learner::LogRow;
use irrl_core::{ActionSet, EpisodeTrace};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError};

pub const TRACE_STATE_COLUMNS: [&str; 11] = [
    "Day", "Stage", "LAI", "ESW1", "ESW2", "ESW3", "ESW4", "ESW5", "CuIrrig", "CuRain", "Action",
];

pub const RESULTS_HEADER: [&str; 5] = ["year", "benchmark", "test_profit_mean", "test_profit_sd", "performance_pct"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub year: i32,
    pub benchmark: Option<f64>,
    pub test_profit_mean: f64,
    pub test_profit_sd: f64,
    pub performance_pct: Option<i64>,
}

/// One evaluation replicate at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub year: i32,
    pub replicate: usize,
    pub profit: f64,
    pub yield_kg_ha: f64,
    pub cu_irrig: f64,
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub year: i32,
    pub benchmark_profit: f64,
    pub episodes_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub day_of_year: u32,
    pub action_mm: f64,
}

/// A parsed trace file row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub day: u32,
    pub state: [f64; 9],
    pub action_mm: f64,
    pub probs: Vec<f64>,
}

/// Integer percent, half away from zero.
pub fn performance_pct(mean: f64, benchmark: f64) -> Option<i64> {
    (benchmark != 0.0).then(|| (100.0 * mean / benchmark).round() as i64)
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

/// Writes serde rows with a header derived from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    read_rows_from(file).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
}

pub fn read_rows_from<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>, CliError> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::config(e.to_string()))
}

pub fn write_train_log(path: &Path, rows: &[LogRow]) -> Result<(), CliError> {
    write_rows(path, rows)
}

pub fn read_train_log(path: &Path) -> Result<Vec<LogRow>, CliError> {
    read_rows(path)
}

/// Results with a blank benchmark column when no benchmark is known.
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let wr = |w: &mut csv::Writer<_>, rec: Vec<String>| w.write_record(rec).map_err(|e| io_error(path, e));
    wr(&mut w, RESULTS_HEADER.iter().map(|s| s.to_string()).collect())?;
    for r in rows {
        wr(
            &mut w,
            vec![
                r.year.to_string(),
                r.benchmark.map(|b| b.to_string()).unwrap_or_default(),
                r.test_profit_mean.to_string(),
                r.test_profit_sd.to_string(),
                r.performance_pct.map(|p| p.to_string()).unwrap_or_default(),
            ],
        )?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    read_rows(path)
}

/// Probability column names: `p` followed by the amount in mm.
pub fn probability_columns(actions: &ActionSet) -> Vec<String> {
    actions.amounts().iter().map(|a| format!("p{a}")).collect()
}

pub fn trace_header(actions: &ActionSet) -> Vec<String> {
    TRACE_STATE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(probability_columns(actions))
        .collect()
}

/// One row per day: the state the decision was made in, the amount applied and the
/// full action distribution (4 decimals). With `paper_format` the state is rounded
/// to display precision: stage 1 dp, LAI 2 dp, water to whole mm.
pub fn write_trace<W: Write>(w: W, trace: &EpisodeTrace, actions: &ActionSet, paper_format: bool) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let err = |e: csv::Error| CliError::runtime(format!("writing trace: {e}"));
    w.write_record(trace_header(actions)).map_err(err)?;
    for step in &trace.steps {
        let s = step.state.to_array();
        let mut rec = vec![step.day_of_year.to_string()];
        if paper_format {
            rec.push(format!("{:.1}", s[0]));
            rec.push(format!("{:.2}", s[1]));
            rec.extend(s[2..].iter().map(|v| format!("{v:.0}")));
        } else {
            rec.extend(s.iter().map(|v| v.to_string()));
        }
        rec.push(actions.amounts()[step.action_index].to_string());
        rec.extend(step.action_probs.iter().map(|p| format!("{p:.4}")));
        w.write_record(rec).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::runtime(format!("writing trace: {e}")))
}

pub fn write_trace_file(path: &Path, trace: &EpisodeTrace, actions: &ActionSet, paper_format: bool) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    write_trace(BufWriter::new(file), trace, actions, paper_format).map_err(|e| io_error(path, e.message))
}

pub fn read_trace_from<R: Read>(reader: R) -> Result<(Vec<String>, Vec<TraceRow>), CliError> {
    let mut r = csv::Reader::from_reader(reader);
    let bad = |e: String| CliError::config(format!("trace: {e}"));
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header.len() < TRACE_STATE_COLUMNS.len() || header[..TRACE_STATE_COLUMNS.len()] != TRACE_STATE_COLUMNS {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .ok_or_else(|| bad(format!("missing column {i}")))?
                .parse::<f64>()
                .map_err(|e| bad(format!("column {}: {e}", header[i])))
        };
        let mut state = [0.0; 9];
        for (k, v) in state.iter_mut().enumerate() {
            *v = num(k + 1)?;
        }
        rows.push(TraceRow {
            day: num(0)? as u32,
            state,
            action_mm: num(10)?,
            probs: (11..header.len()).map(num).collect::<Result<_, _>>()?,
        });
    }
    Ok((header, rows))
}

pub fn read_trace(path: &Path) -> Result<(Vec<String>, Vec<TraceRow>), CliError> {
    let file = File::open(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    read_trace_from(file).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
}
