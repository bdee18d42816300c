//! Runs solvers over suites and collects run records.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use super::generate::Generated;
use super::records::RunRecord;
use crate::baseline::{ls_solve, refine, sals_solve};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::parallel::Workers;
use crate::penalty::sequential_penalty;
use crate::problem::{EvalCounter, SeparableProblem};
use crate::report::{write_trace, SolveReport, Termination};

/// Solvers available to the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Penalty method on one worker followed by refinement.
    Pddf,
    /// Penalty method on the configured worker count followed by refinement.
    PddfParallel,
    Ls,
    Sals,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [Self::Pddf, Self::PddfParallel, Self::Ls, Self::Sals];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pddf => "pddf",
            Self::PddfParallel => "pddf-parallel",
            Self::Ls => "ls",
            Self::Sals => "sals",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown solver {s:?}")))
    }
}

/// Result of one solver run.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub f0: f64,
    pub report: SolveReport,
    pub wall_time: Duration,
}

/// Runs `kind` on `p` from its start point with a fresh counter.
pub fn solve(p: &SeparableProblem, kind: SolverKind, cfg: &Config, workers: usize) -> Result<SolveOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let (f0, report) = match kind {
        SolverKind::Pddf | SolverKind::PddfParallel => {
            let w = if kind == SolverKind::Pddf { 1 } else { workers };
            let run = sequential_penalty(p, &cfg.penalty()?, &cfg.search(), w)?;
            let mut counter = run.report.evals.clone();
            let refined = refine(p, &run.report.final_x, &cfg.refine_ls()?, &mut counter, &run.report, cfg.refine_mode()?)?;
            (run.f0, refined)
        }
        SolverKind::Ls | SolverKind::Sals => {
            let mut counter = EvalCounter::new(p.num_subs());
            let ls = cfg.ls()?;
            let report = if kind == SolverKind::Ls {
                ls_solve(p, p.x0(), &ls, &mut counter)?
            } else {
                sals_solve(p, p.x0(), &ls, &mut counter)?
            };
            let f0 = report.history.first().map_or(f64::NAN, |h| h.best_f);
            (f0, report)
        }
    };
    Ok(SolveOutcome {
        f0,
        report,
        wall_time: started.elapsed(),
    })
}

/// Where run artifacts go.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions<'a> {
    /// Per-evaluation artificial delay.
    pub eval_delay: Option<Duration>,
    /// Directory receiving one trace CSV per run.
    pub trace_dir: Option<&'a Path>,
}

/// File-name-safe form of `problem_solver`.
pub fn trace_file_name(problem: &str, solver: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect()
    };
    format!("{}__{}.csv", clean(problem), clean(solver))
}

fn run_one(g: &Generated, kind: SolverKind, cfg: &Config, workers: usize, opts: &RunOptions) -> RunRecord {
    let p = &g.problem;
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| solve(p, kind, cfg, workers)));
    let failed = |why: String| {
        log::warn!("{} on {} failed: {why}", kind, p.name());
        RunRecord {
            problem: p.name().to_string(),
            solver: kind.to_string(),
            n: p.dim(),
            m: p.num_subs(),
            f0: catch_unwind(AssertUnwindSafe(|| p.value_uncounted(p.x0()))).unwrap_or(f64::NAN),
            final_f: f64::NAN,
            evals: 0,
            history: Vec::new(),
            wall_time: Some(started.elapsed().as_secs_f64()),
            termination: Termination::Failed,
        }
    };
    let out = match outcome {
        Ok(Ok(out)) => out,
        Ok(Err(e)) => return failed(e.to_string()),
        Err(panic) => {
            let why = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            return failed(why);
        }
    };
    if let Some(dir) = opts.trace_dir {
        let path = dir.join(trace_file_name(p.name(), kind.as_str()));
        let written = fs::File::create(&path)
            .map_err(Error::from)
            .and_then(|f| write_trace(&out.report.trace, std::io::BufWriter::new(f)));
        if let Err(e) = written {
            log::warn!("cannot write trace {}: {e}", path.display());
        }
    }
    RunRecord {
        problem: p.name().to_string(),
        solver: kind.to_string(),
        n: p.dim(),
        m: p.num_subs(),
        f0: out.f0,
        final_f: out.report.final_f,
        evals: out.report.evals.total(),
        history: out.report.history,
        wall_time: Some(out.wall_time.as_secs_f64()),
        termination: out.report.termination,
    }
}

/// Runs every solver on every problem with fresh counters.
///
/// Records are ordered by problem, then solver. Runs are spread over
/// `workers` threads unless an evaluation delay is set or a parallel solver
/// is selected, in which case they run one after another so wall times stay
/// meaningful. A failing run becomes a record with termination `failed`.
pub fn run_suite(
    problems: &[Generated],
    solvers: &[SolverKind],
    cfg: &Config,
    workers: usize,
    opts: &RunOptions,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    if let Some(dir) = opts.trace_dir {
        fs::create_dir_all(dir)?;
    }
    let problems: Vec<Generated> = problems
        .iter()
        .map(|g| Generated {
            problem: g.problem.clone().with_eval_delay(opts.eval_delay),
            ..g.clone()
        })
        .collect();
    let pairs: Vec<(usize, SolverKind)> = (0..problems.len())
        .flat_map(|i| solvers.iter().map(move |&s| (i, s)))
        .collect();
    let sequential = opts.eval_delay.is_some() || solvers.contains(&SolverKind::PddfParallel);
    let pool = if sequential {
        Workers::sequential()
    } else {
        Workers::new(workers)?
    };
    Ok(pool.map(pairs.len(), |k| {
        let (i, s) = pairs[k];
        let rec = run_one(&problems[i], s, cfg, workers, opts);
        log::info!(
            "{} / {}: f = {:e} after {} evals ({})",
            rec.problem,
            rec.solver,
            rec.final_f,
            rec.evals,
            rec.termination
        );
        rec
    }))
}
