//! Coordinate line-search baselines on the original problem.
//!
//! `ls_solve` sweeps the full variable vector with the bounds-aware
//! coordinate search, paying `m` sub-function evaluations per trial point.
//! `sals_solve` takes exactly the same decisions but re-evaluates only the
//! sub-functions whose block contains the moved coordinate, reading the rest
//! from a cache of values at the current point.

use std::time::{Duration, Instant};

use crate::dfsearch::{search_from, Bounds, CoordinateOracle, SearchConfig, StepsizeVector};
use crate::error::{Error, Result};
use crate::problem::{ordered_sum, EvalCounter, SeparableProblem};
use crate::report::{push_history, HistoryPoint, SolveReport, Termination, TraceRow};

/// Parameters of the coordinate line-search baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct LsConfig {
    pub gamma: f64,
    pub theta: f64,
    pub max_expansions: u32,
    /// Stop once every tentative stepsize is at most this value.
    pub stop_alpha: f64,
    pub wall_clock_limit: Option<Duration>,
    /// Stop after the sweep that reaches this many evaluations.
    pub max_evals: Option<u64>,
}

impl Default for LsConfig {
    fn default() -> Self {
        let s = SearchConfig::default();
        Self {
            gamma: s.gamma,
            theta: s.theta,
            max_expansions: s.max_expansions,
            stop_alpha: 1e-4,
            wall_clock_limit: Some(Duration::from_secs(600)),
            max_evals: None,
        }
    }
}

impl LsConfig {
    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            gamma: self.gamma,
            theta: self.theta,
            max_expansions: self.max_expansions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.search().validate()?;
        if !(self.stop_alpha > 0.0) {
            return Err(Error::Usage(format!(
                "stop_alpha must be positive, got {}",
                self.stop_alpha
            )));
        }
        Ok(())
    }
}

/// Which baseline performs a refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineMode {
    Ls,
    Sals,
}

/// Sub-function values at the current point of a structure-aware search.
#[derive(Clone, Debug, PartialEq)]
pub struct SubValueCache {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl SubValueCache {
    pub fn new(values: Vec<f64>) -> Self {
        let valid = vec![true; values.len()];
        Self { values, valid }
    }

    pub fn total(&self) -> f64 {
        ordered_sum(&self.values)
    }
}

/// Called after every accepted step with the new point and its value.
pub type StepObserver<'a> = &'a mut dyn FnMut(&[f64], f64);

struct Tracker<'a> {
    x: Vec<f64>,
    history: Vec<HistoryPoint>,
    observer: Option<StepObserver<'a>>,
}

impl Tracker<'_> {
    fn accept(&mut self, i: usize, coord: f64, f: f64, evals: u64) {
        self.x[i] = coord;
        push_history(&mut self.history, evals, f);
        if let Some(obs) = self.observer.as_mut() {
            obs(&self.x, f);
        }
    }
}

fn trial_point(x: &[f64], i: usize, coord: f64) -> Vec<f64> {
    let mut t = x.to_vec();
    t[i] = coord;
    t
}

struct FullOracle<'a, 'o> {
    p: &'a SeparableProblem,
    counter: &'a mut EvalCounter,
    tracker: Tracker<'o>,
    check_region: bool,
}

impl CoordinateOracle for FullOracle<'_, '_> {
    type Probe = f64;

    fn probe(&mut self, w: &[f64], i: usize, coord: f64) -> (f64, f64) {
        let t = trial_point(w, i, coord);
        if self.check_region && !self.p.region().contains(&t, 0.0) {
            return (f64::INFINITY, f64::INFINITY);
        }
        let vals: Vec<f64> = (0..self.p.num_subs())
            .map(|j| {
                self.p
                    .eval_unchecked(j, &self.p.block(j).gather(&t), &mut *self.counter)
            })
            .collect();
        let f = ordered_sum(&vals);
        (f, f)
    }

    fn commit(&mut self, i: usize, coord: f64, f: f64) {
        self.tracker.accept(i, coord, f, self.counter.total());
    }
}

struct SalsOracle<'a, 'o> {
    p: &'a SeparableProblem,
    counter: &'a mut EvalCounter,
    cache: SubValueCache,
    tracker: Tracker<'o>,
    check_region: bool,
}

impl CoordinateOracle for SalsOracle<'_, '_> {
    type Probe = Vec<(usize, f64)>;

    fn probe(&mut self, w: &[f64], i: usize, coord: f64) -> (f64, Self::Probe) {
        let t = trial_point(w, i, coord);
        if self.check_region && !self.p.region().contains(&t, 0.0) {
            return (f64::INFINITY, Vec::new());
        }
        let mut vals = self.cache.values.clone();
        let mut changed = Vec::with_capacity(self.p.affected_blocks(i).len());
        for &j in self.p.affected_blocks(i) {
            let v = self
                .p
                .eval_unchecked(j, &self.p.block(j).gather(&t), &mut *self.counter);
            vals[j] = v;
            changed.push((j, v));
        }
        (ordered_sum(&vals), changed)
    }

    fn commit(&mut self, i: usize, coord: f64, changed: Self::Probe) {
        for (j, v) in changed {
            self.cache.values[j] = v;
            self.cache.valid[j] = true;
        }
        let f = self.cache.total();
        self.tracker.accept(i, coord, f, self.counter.total());
    }
}

/// Full-vector coordinate line search; every trial costs `m` evaluations.
pub fn ls_solve(
    p: &SeparableProblem,
    x0: &[f64],
    cfg: &LsConfig,
    counter: &mut EvalCounter,
) -> Result<SolveReport> {
    run(p, x0, cfg, counter, RefineMode::Ls, None)
}

/// Structure-aware variant of [`ls_solve`] with identical iterates.
pub fn sals_solve(
    p: &SeparableProblem,
    x0: &[f64],
    cfg: &LsConfig,
    counter: &mut EvalCounter,
) -> Result<SolveReport> {
    run(p, x0, cfg, counter, RefineMode::Sals, None)
}

/// Like [`ls_solve`] / [`sals_solve`], reporting every accepted step to `observer`.
pub fn solve_observed(
    p: &SeparableProblem,
    x0: &[f64],
    cfg: &LsConfig,
    counter: &mut EvalCounter,
    mode: RefineMode,
    observer: StepObserver<'_>,
) -> Result<SolveReport> {
    run(p, x0, cfg, counter, mode, Some(observer))
}

/// Runs a baseline from `x_pd` and appends its history to `prior`.
///
/// `counter` must be the counter used for the run that produced `x_pd`, so
/// the evaluation axis continues where that run stopped.
pub fn refine(
    p: &SeparableProblem,
    x_pd: &[f64],
    cfg: &LsConfig,
    counter: &mut EvalCounter,
    prior: &SolveReport,
    mode: RefineMode,
) -> Result<SolveReport> {
    let own = run(p, x_pd, cfg, counter, mode, None)?;
    let mut history = prior.history.clone();
    for h in &own.history {
        push_history(&mut history, h.evals, h.best_f);
    }
    let mut trace = prior.trace.clone();
    let k0 = trace.last().map_or(0, |r| r.k + 1);
    trace.extend(own.trace.into_iter().map(|r| TraceRow { k: k0 + r.k, ..r }));
    Ok(SolveReport {
        final_x: own.final_x,
        final_f: own.final_f,
        history,
        termination: Termination::Refined,
        outer_iters: prior.outer_iters,
        evals: own.evals,
        trace,
        inexact_x_update: prior.inexact_x_update,
        inner_cap_hit: prior.inner_cap_hit,
    })
}

fn run(
    p: &SeparableProblem,
    x0: &[f64],
    cfg: &LsConfig,
    counter: &mut EvalCounter,
    mode: RefineMode,
    observer: Option<StepObserver<'_>>,
) -> Result<SolveReport> {
    cfg.validate()?;
    if x0.len() != p.dim() {
        return Err(Error::Usage(format!(
            "start has length {}, expected {}",
            x0.len(),
            p.dim()
        )));
    }
    if !p.region().contains(x0, 0.0) {
        return Err(Error::Usage("start point is not feasible".into()));
    }
    if counter.per_sub().len() != p.num_subs() {
        return Err(Error::Usage("counter does not match the problem".into()));
    }
    let started = Instant::now();
    let search = cfg.search();
    let bounds = p.region().bounds().map(|(l, u)| Bounds::new(l, u));
    let check_region = !p.region().is_separable();

    let fy = p.sub_values(x0, counter)?;
    let f0 = ordered_sum(&fy);
    if !f0.is_finite() {
        return Err(Error::Evaluation(format!("f(x0) = {f0} is not finite")));
    }
    let mut tracker = Tracker {
        x: x0.to_vec(),
        history: Vec::new(),
        observer,
    };
    push_history(&mut tracker.history, counter.total(), f0);
    let mut trace = vec![TraceRow {
        k: 0,
        tau: None,
        inner_iters: None,
        evals: counter.total(),
        f: f0,
        residual: None,
        feasibility_gap: None,
    }];

    let mut cache = SubValueCache::new(fy);
    let mut x = x0.to_vec();
    let mut f = f0;
    let mut steps = StepsizeVector::ones(p.dim());
    let mut sweeps = 0;

    let termination = loop {
        let out = match mode {
            RefineMode::Ls => {
                let mut oracle = FullOracle {
                    p,
                    counter: &mut *counter,
                    tracker,
                    check_region,
                };
                let out = search_from(&mut oracle, x, f, steps, &search, bounds)?;
                tracker = oracle.tracker;
                out
            }
            RefineMode::Sals => {
                let mut oracle = SalsOracle {
                    p,
                    counter: &mut *counter,
                    cache,
                    tracker,
                    check_region,
                };
                let out = search_from(&mut oracle, x, f, steps, &search, bounds)?;
                tracker = oracle.tracker;
                cache = oracle.cache;
                out
            }
        };
        sweeps += 1;
        x = out.point;
        f = out.value;
        steps = out.stepsizes;
        trace.push(TraceRow {
            k: sweeps,
            tau: None,
            inner_iters: None,
            evals: counter.total(),
            f,
            residual: None,
            feasibility_gap: None,
        });
        if steps.max() <= cfg.stop_alpha {
            break Termination::StepTol;
        }
        if cfg.max_evals.is_some_and(|b| counter.total() >= b) {
            break Termination::EvalBudget;
        }
        if cfg.wall_clock_limit.is_some_and(|d| started.elapsed() >= d) {
            break Termination::WallClock;
        }
    };
    push_history(&mut tracker.history, counter.total(), f);

    Ok(SolveReport {
        final_x: x,
        final_f: f,
        history: tracker.history,
        termination,
        outer_iters: sweeps,
        evals: counter.clone(),
        trace,
        inexact_x_update: false,
        inner_cap_hit: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{FeasibleRegion, IndexSet, SubFunction};

    fn quad_1d() -> SeparableProblem {
        SeparableProblem::new(
            1,
            vec![SubFunction::from_fn(IndexSet::range(0, 1).unwrap(), |y: &[f64]| {
                (y[0] - 1.0).powi(2)
            })],
            FeasibleRegion::uniform_box(1, 0.0, 2.0).unwrap(),
            vec![0.0],
        )
        .unwrap()
    }

    fn disjoint(m: usize) -> SeparableProblem {
        let subs = (0..m)
            .map(|j| {
                let c = j as f64 * 0.3 - 0.5;
                SubFunction::from_fn(IndexSet::range(2 * j, 2).unwrap(), move |y: &[f64]| {
                    (y[0] - c).powi(2) + (y[1] + c).powi(2) + 0.5 * y[0] * y[1]
                })
            })
            .collect();
        SeparableProblem::new(
            2 * m,
            subs,
            FeasibleRegion::uniform_box(2 * m, -1.0, 1.0).unwrap(),
            vec![0.7; 2 * m],
        )
        .unwrap()
    }

    fn chain(m: usize) -> SeparableProblem {
        let subs = (0..m)
            .map(|j| {
                SubFunction::from_fn(IndexSet::range(j, 2).unwrap(), move |y: &[f64]| {
                    (y[0] - 1.0).powi(2) + 3.0 * (y[1] - y[0] * y[0]).powi(2)
                })
            })
            .collect();
        SeparableProblem::new(m + 1, subs, FeasibleRegion::Unbounded, vec![-0.5; m + 1]).unwrap()
    }

    #[test]
    fn one_dimensional_quadratic() {
        let p = quad_1d();
        let mut c = EvalCounter::new(1);
        let r = ls_solve(&p, &[0.0], &LsConfig::default(), &mut c).unwrap();
        assert!((r.final_x[0] - 1.0).abs() <= 1e-4);
        assert!(r.final_f <= 1e-6);
        assert_eq!(r.termination, Termination::StepTol);
    }

    #[test]
    fn strict_minimizer_contracts_in_fourteen_sweeps() {
        let p = SeparableProblem::new(
            1,
            vec![SubFunction::from_fn(IndexSet::range(0, 1).unwrap(), |y: &[f64]| y[0] * y[0])],
            FeasibleRegion::Unbounded,
            vec![0.0],
        )
        .unwrap();
        let mut c = EvalCounter::new(1);
        let r = ls_solve(&p, &[0.0], &LsConfig::default(), &mut c).unwrap();
        assert_eq!(r.outer_iters, 14);
        assert_eq!(r.final_x, vec![0.0]);
        // initial value, then two polls per sweep
        assert_eq!(c.total(), 1 + 14 * 2);
    }

    #[test]
    fn sweep_without_acceptance_costs_two_n_m() {
        let m = 3;
        let subs = (0..m)
            .map(|_| SubFunction::from_fn(IndexSet::range(0, 2).unwrap(), |y: &[f64]| y[0] * y[0] + y[1] * y[1]))
            .collect();
        let p = SeparableProblem::new(2, subs, FeasibleRegion::Unbounded, vec![0.0; 2]).unwrap();
        let cfg = LsConfig {
            stop_alpha: 0.6,
            ..Default::default()
        };
        let mut c = EvalCounter::new(m);
        let r = ls_solve(&p, &[0.0, 0.0], &cfg, &mut c).unwrap();
        assert_eq!(r.outer_iters, 1);
        assert_eq!(c.total(), m as u64 + 2 * 2 * m as u64);
    }

    #[test]
    fn sals_matches_ls_exactly() {
        for p in [disjoint(5), chain(12)] {
            let mut path_ls = Vec::new();
            let mut path_sals = Vec::new();
            let mut c_ls = EvalCounter::new(p.num_subs());
            let mut c_sals = EvalCounter::new(p.num_subs());
            let cfg = LsConfig::default();
            let ls = solve_observed(&p, p.x0(), &cfg, &mut c_ls, RefineMode::Ls, &mut |x, f| {
                path_ls.push((x.to_vec(), f))
            })
            .unwrap();
            let sals = solve_observed(&p, p.x0(), &cfg, &mut c_sals, RefineMode::Sals, &mut |x, f| {
                path_sals.push((x.to_vec(), f))
            })
            .unwrap();
            assert!(!path_ls.is_empty());
            assert_eq!(path_ls, path_sals);
            assert_eq!(ls.final_x, sals.final_x);
            assert_eq!(ls.final_f.to_bits(), sals.final_f.to_bits());
            assert!(c_sals.total() < c_ls.total());
        }
    }

    #[test]
    fn sals_cache_stays_coherent() {
        let p = chain(6);
        let mut c = EvalCounter::new(p.num_subs());
        let mut checks = 0;
        solve_observed(&p, p.x0(), &LsConfig::default(), &mut c, RefineMode::Sals, &mut |x, f| {
            assert_eq!(f.to_bits(), p.value_uncounted(x).to_bits());
            checks += 1;
        })
        .unwrap();
        assert!(checks > 0);
    }

    #[test]
    fn disjoint_poll_costs_one_evaluation() {
        let p = disjoint(5);
        let cfg = LsConfig {
            max_evals: Some(1),
            ..Default::default()
        };
        let mut c_ls = EvalCounter::new(5);
        let mut c_sals = EvalCounter::new(5);
        ls_solve(&p, p.x0(), &cfg, &mut c_ls).unwrap();
        sals_solve(&p, p.x0(), &cfg, &mut c_sals).unwrap();
        // one sweep each: LS pays 5 per trial, SALS 1
        assert_eq!(c_ls.total() - 5, 5 * (c_sals.total() - 5));
    }

    #[test]
    fn full_overlap_costs_the_same() {
        let subs = (0..3)
            .map(|k| {
                SubFunction::from_fn(IndexSet::range(0, 2).unwrap(), move |y: &[f64]| {
                    (y[0] - k as f64).powi(2) + y[1] * y[1]
                })
            })
            .collect();
        let p = SeparableProblem::new(2, subs, FeasibleRegion::Unbounded, vec![3.0, 2.0]).unwrap();
        let mut a = EvalCounter::new(3);
        let mut b = EvalCounter::new(3);
        ls_solve(&p, p.x0(), &LsConfig::default(), &mut a).unwrap();
        sals_solve(&p, p.x0(), &LsConfig::default(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trials_stay_in_the_box_and_descend() {
        let p = disjoint(4);
        let mut c = EvalCounter::new(4);
        let mut last = f64::INFINITY;
        solve_observed(&p, p.x0(), &LsConfig::default(), &mut c, RefineMode::Ls, &mut |x, f| {
            assert!(p.region().contains(x, 0.0));
            assert!(f < last);
            last = f;
        })
        .unwrap();
    }

    #[test]
    fn refining_a_stationary_point_accepts_nothing() {
        let p = disjoint(3);
        let mut c = EvalCounter::new(3);
        let first = ls_solve(&p, p.x0(), &LsConfig::default(), &mut c).unwrap();
        let mut steps = 0;
        let again = solve_observed(&p, &first.final_x, &LsConfig::default(), &mut c, RefineMode::Ls, &mut |_, _| {
            steps += 1
        })
        .unwrap();
        assert_eq!(steps, 0);
        assert_eq!(again.final_x, first.final_x);
    }

    #[test]
    fn refine_continues_the_evaluation_axis() {
        let p = chain(4);
        let mut c = EvalCounter::new(4);
        let first = ls_solve(&p, p.x0(), &LsConfig::default(), &mut c).unwrap();
        let last_index = first.history.last().unwrap().evals;
        let refined = refine(&p, &first.final_x, &LsConfig::default(), &mut c, &first, RefineMode::Ls).unwrap();
        assert_eq!(refined.termination, Termination::Refined);
        assert_eq!(refined.history[first.history.len()].evals, last_index + 4);
        assert!(refined
            .history
            .windows(2)
            .all(|w| w[0].evals < w[1].evals && w[1].best_f <= w[0].best_f));
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let p = quad_1d();
        let mut c = EvalCounter::new(1);
        assert!(matches!(ls_solve(&p, &[3.0], &LsConfig::default(), &mut c), Err(Error::Usage(_))));
        assert!(matches!(
            ls_solve(&p, &[0.0], &LsConfig { stop_alpha: 0.0, ..Default::default() }, &mut c),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn custom_region_trials_are_rejected_without_evaluation() {
        let half = FeasibleRegion::custom(|v: &[f64]| vec![v[0].max(0.0)]);
        let p = SeparableProblem::new(
            1,
            vec![SubFunction::from_fn(IndexSet::range(0, 1).unwrap(), |y: &[f64]| (y[0] + 1.0).powi(2))],
            half,
            vec![0.0],
        )
        .unwrap();
        let mut c = EvalCounter::new(1);
        let r = ls_solve(&p, &[0.0], &LsConfig::default(), &mut c).unwrap();
        assert_eq!(r.final_x, vec![0.0]);
        // only the +e poll is evaluated in each of the 14 sweeps
        assert_eq!(c.total(), 1 + 14);
    }
}
