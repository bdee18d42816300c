//! Run records and their CSV form.
//!
//! `records.csv` holds everything that is deterministic for a given suite and
//! configuration; wall times go to a separate `timings.csv` so that reruns
//! produce byte-identical records.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::report::{HistoryPoint, Termination};

/// Summary of one solver run on one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub problem: String,
    pub solver: String,
    pub n: usize,
    pub m: usize,
    pub f0: f64,
    pub final_f: f64,
    pub evals: u64,
    /// Best value so far against cumulative sub-function evaluations.
    pub history: Vec<HistoryPoint>,
    pub wall_time: Option<f64>,
    pub termination: Termination,
}

impl RunRecord {
    /// Best value reached by the run, `NaN` when it has no history.
    pub fn best_f(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.best_f)
    }

    /// Size of one budget group, `m (n + 1)` evaluations.
    pub fn group_size(&self) -> f64 {
        (self.m * (self.n + 1)) as f64
    }
}

pub const RECORD_HEADER: [&str; 9] = [
    "problem",
    "solver",
    "n",
    "m",
    "f0",
    "final_f",
    "evals",
    "termination",
    "history",
];

pub const TIMING_HEADER: [&str; 3] = ["problem", "solver", "wall_time_s"];

fn encode_history(h: &[HistoryPoint]) -> String {
    h.iter()
        .map(|p| format!("{}:{}", p.evals, p.best_f))
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_history(s: &str) -> Result<Vec<HistoryPoint>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|pair| {
            let (e, f) = pair
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad history point {pair:?}")))?;
            Ok(HistoryPoint {
                evals: parse_field(e, "history evals")?,
                best_f: parse_field(f, "history value")?,
            })
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse {what} from {s:?}")))
}

pub fn write_records<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.problem.clone(),
            r.solver.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.f0.to_string(),
            r.final_f.to_string(),
            r.evals.to_string(),
            r.termination.to_string(),
            encode_history(&r.history),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMING_HEADER)?;
    for r in records {
        w.write_record([
            r.problem.clone(),
            r.solver.clone(),
            r.wall_time.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}, expected {expected:?}",
            found.iter().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

fn to_parse(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    check_header(rd.headers().map_err(to_parse)?, &RECORD_HEADER)?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(to_parse)?;
        if row.len() != RECORD_HEADER.len() {
            return Err(Error::Parse(format!("record has {} fields", row.len())));
        }
        let rec = RunRecord {
            problem: row[0].to_string(),
            solver: row[1].to_string(),
            n: parse_field(&row[2], "n")?,
            m: parse_field(&row[3], "m")?,
            f0: parse_field(&row[4], "f0")?,
            final_f: parse_field(&row[5], "final_f")?,
            evals: parse_field(&row[6], "evals")?,
            termination: row[7].parse()?,
            history: decode_history(&row[8])?,
            wall_time: None,
        };
        if rec.n == 0 || rec.m == 0 {
            return Err(Error::Parse(format!("record {}/{} has zero size", rec.problem, rec.solver)));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Fills `wall_time` from a timings CSV, matching on (problem, solver).
pub fn attach_timings<R: Read>(records: &mut [RunRecord], input: R) -> Result<()> {
    let mut rd = csv::Reader::from_reader(input);
    check_header(rd.headers().map_err(to_parse)?, &TIMING_HEADER)?;
    let mut times = HashMap::new();
    for row in rd.records() {
        let row = row.map_err(to_parse)?;
        if row.len() != TIMING_HEADER.len() {
            return Err(Error::Parse(format!("timing row has {} fields", row.len())));
        }
        let t = if row[2].is_empty() {
            None
        } else {
            Some(parse_field::<f64>(&row[2], "wall time")?)
        };
        times.insert((row[0].to_string(), row[1].to_string()), t);
    }
    for r in records {
        if let Some(t) = times.get(&(r.problem.clone(), r.solver.clone())) {
            r.wall_time = *t;
        }
    }
    Ok(())
}
