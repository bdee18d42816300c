//! Run reports shared by all solvers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::problem::EvalCounter;

/// Why a solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    /// Outer penalty iterates stopped moving.
    OuterStepTol,
    /// Outer iteration limit reached.
    MaxOuter,
    /// Wall-clock limit reached.
    WallClock,
    /// Penalty run followed by a coordinate-search refinement.
    Refined,
    /// Every tentative stepsize of a coordinate search fell below its threshold.
    StepTol,
    /// The evaluation budget was exhausted.
    EvalBudget,
    /// The solver failed; the record counts as unsolved.
    Failed,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::OuterStepTol => "outer_step_tol",
            Self::MaxOuter => "max_outer",
            Self::WallClock => "wall_clock",
            Self::Refined => "refined",
            Self::StepTol => "step_tol",
            Self::EvalBudget => "eval_budget",
            Self::Failed => "failed",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "outer_step_tol" => Self::OuterStepTol,
            "max_outer" => Self::MaxOuter,
            "wall_clock" => Self::WallClock,
            "refined" => Self::Refined,
            "step_tol" => Self::StepTol,
            "eval_budget" => Self::EvalBudget,
            "failed" => Self::Failed,
            other => return Err(Error::Parse(format!("unknown termination {other:?}"))),
        })
    }
}

/// Best objective value seen after `evals` sub-function evaluations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryPoint {
    pub evals: u64,
    pub best_f: f64,
}

/// One row of the per-iteration trace.
///
/// Penalty runs fill every column; coordinate-search sweeps leave the
/// penalty-specific ones empty.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub tau: Option<f64>,
    pub inner_iters: Option<usize>,
    pub evals: u64,
    pub f: f64,
    pub residual: Option<f64>,
    pub feasibility_gap: Option<f64>,
}

pub const TRACE_HEADER: [&str; 7] = [
    "k",
    "tau",
    "inner_iters",
    "evals",
    "f",
    "residual",
    "feasibility_gap",
];

/// Writes trace rows as CSV.
pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.k.to_string(),
            opt(r.tau),
            r.inner_iters.map(|x| x.to_string()).unwrap_or_default(),
            r.evals.to_string(),
            r.f.to_string(),
            opt(r.residual),
            opt(r.feasibility_gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of a solver run.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub final_x: Vec<f64>,
    pub final_f: f64,
    /// Non-increasing best values against strictly increasing evaluation counts.
    pub history: Vec<HistoryPoint>,
    pub termination: Termination,
    /// Outer iterations for penalty runs, sweeps for coordinate searches.
    pub outer_iters: usize,
    pub evals: EvalCounter,
    pub trace: Vec<TraceRow>,
    /// Set when an x-update over a custom region could only be approximated.
    pub inexact_x_update: bool,
    /// Set when some inner loop hit its iteration safety cap.
    pub inner_cap_hit: bool,
}

impl SolveReport {
    pub fn best_f(&self) -> f64 {
        self.history.last().map_or(self.final_f, |h| h.best_f)
    }
}

/// Appends a history point, keeping the best value monotone and skipping
/// points that do not advance the evaluation count.
pub(crate) fn push_history(history: &mut Vec<HistoryPoint>, evals: u64, f: f64) {
    let best = match history.last() {
        Some(last) if !(f < last.best_f) => last.best_f,
        _ => f,
    };
    match history.last_mut() {
        Some(last) if last.evals >= evals => last.best_f = best,
        _ => history.push(HistoryPoint { evals, best_f: best }),
    }
}
