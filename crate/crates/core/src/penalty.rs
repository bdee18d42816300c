//! Penalty decomposition solver.
//!
//! Every sub-function gets its own copy `y_j` of the variables it reads, and
//! the consistency constraints `x_{S_j} = y_j` are moved into the objective
//! through a quadratic penalty:
//!
//! ```text
//! P_tau(x, y) = Σ_j f_j(y_j) + tau/2 Σ_j ||x_{S_j} - y_j||²,   x ∈ X.
//! ```
//!
//! For a fixed `tau` the subproblem is solved by alternate minimization: a
//! derivative-free coordinate search on each `y_j` (independent across
//! blocks, so they can run in parallel), then the exact minimization over
//! `x`, which reduces to projecting the per-coordinate centroid of the copies.
//! The outer loop increases `tau` geometrically and warm-starts each
//! subproblem from the previous solution whenever that keeps the penalty
//! value below `f(x0)`.

use std::time::{Duration, Instant};

use crate::dfsearch::{search_unchecked, CoordinateOracle, SearchConfig, StepsizeVector};
use crate::error::{Error, Result};
use crate::parallel::Workers;
use crate::problem::{max_abs_diff, norm2_diff, ordered_sum, EvalCounter, FeasibleRegion, SeparableProblem};
use crate::report::{push_history, SolveReport, Termination, TraceRow};

/// Schedule of the inner tolerance `xi_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XiSchedule {
    /// `xi_k = xi` for every `k`.
    Constant,
    /// `xi_k = xi * factor^k`.
    Geometric(f64),
}

/// Parameters of the outer penalty loop.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyParams {
    pub tau0: f64,
    pub tau_growth: f64,
    pub tau_cap: f64,
    pub xi: f64,
    pub xi_schedule: XiSchedule,
    /// Stop when `||x^k - x^{k-1}||` drops to this value.
    pub outer_step_tol: f64,
    pub max_outer: usize,
    pub wall_clock_limit: Option<Duration>,
    /// Inner iterations allowed per outer iteration; `None` means `10 n m`.
    pub inner_cap: Option<usize>,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            tau_growth: 1.1,
            tau_cap: 1e8,
            xi: 1e-2,
            xi_schedule: XiSchedule::Constant,
            outer_step_tol: 1e-2,
            max_outer: 100,
            wall_clock_limit: Some(Duration::from_secs(600)),
            inner_cap: None,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0) {
            return Err(Error::Usage(format!("tau0 must be positive, got {}", self.tau0)));
        }
        if !(self.tau_growth > 1.0) {
            return Err(Error::Usage(format!(
                "tau_growth must exceed 1, got {}",
                self.tau_growth
            )));
        }
        if !(self.tau_cap >= self.tau0) {
            return Err(Error::Usage("tau_cap must be at least tau0".into()));
        }
        if !(self.xi > 0.0) {
            return Err(Error::Usage(format!("xi must be positive, got {}", self.xi)));
        }
        if let XiSchedule::Geometric(r) = self.xi_schedule {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Usage(format!("xi decay factor must lie in (0, 1], got {r}")));
            }
        }
        if !(self.outer_step_tol >= 0.0) {
            return Err(Error::Usage("outer_step_tol must be non-negative".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::Usage("max_outer must be at least 1".into()));
        }
        Ok(())
    }

    /// `tau_k`, with `tau_{k+1} = min(growth * tau_k, cap)`.
    pub fn tau_at(&self, k: usize) -> f64 {
        (0..k).fold(self.tau0, |t, _| (t * self.tau_growth).min(self.tau_cap))
    }

    pub fn xi_at(&self, k: usize) -> f64 {
        match self.xi_schedule {
            XiSchedule::Constant => self.xi,
            XiSchedule::Geometric(r) => self.xi * r.powi(k as i32),
        }
    }
}

/// Iterate of the decomposed problem.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyState {
    /// Feasible master vector.
    pub x: Vec<f64>,
    /// Copy `y_j` of the block `S_j`, one per sub-function.
    pub ys: Vec<Vec<f64>>,
    /// `f_j(y_j)`, kept alongside the copies so the penalty value is known
    /// without calling the oracles again.
    pub fy: Vec<f64>,
    pub tau: f64,
    /// Tentative stepsizes of each block search.
    pub stepsizes: Vec<StepsizeVector>,
}

impl PenaltyState {
    /// Consistent state `y_j = x_{S_j}` with known sub-function values.
    pub fn consistent(p: &SeparableProblem, x: Vec<f64>, fy: Vec<f64>, tau: f64) -> Self {
        let ys: Vec<Vec<f64>> = p.subs().iter().map(|s| s.block().gather(&x)).collect();
        let stepsizes = ys.iter().map(|y| StepsizeVector::ones(y.len())).collect();
        Self {
            x,
            ys,
            fy,
            tau,
            stepsizes,
        }
    }

    /// Consistent state at `x0`, spending `m` evaluations.
    pub fn initial(p: &SeparableProblem, tau: f64, counter: &mut EvalCounter) -> Result<Self> {
        let fy = p.sub_values(p.x0(), counter)?;
        Ok(Self::consistent(p, p.x0().to_vec(), fy, tau))
    }

    pub fn check(&self, p: &SeparableProblem) -> Result<()> {
        let ok = self.x.len() == p.dim()
            && self.ys.len() == p.num_subs()
            && self.fy.len() == p.num_subs()
            && self.stepsizes.len() == p.num_subs()
            && p.subs().iter().zip(&self.ys).zip(&self.stepsizes).all(|((s, y), a)| {
                s.block().len() == y.len() && a.len() == y.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Usage("penalty state does not match the problem blocks".into()))
        }
    }

    /// `tau/2 Σ_j ||x_{S_j} - y_j||²`.
    pub fn penalty_term(&self, p: &SeparableProblem) -> f64 {
        let d: Vec<f64> = (0..p.num_subs())
            .map(|j| block_sq_dist(p, j, &self.x, &self.ys[j]))
            .collect();
        0.5 * self.tau * ordered_sum(&d)
    }

    /// Penalty value from the cached sub-function values (no evaluations).
    pub fn cached_value(&self, p: &SeparableProblem) -> f64 {
        ordered_sum(&self.fy) + self.penalty_term(p)
    }

    /// `max_j ||x_{S_j} - y_j||_∞`.
    pub fn feasibility_gap(&self, p: &SeparableProblem) -> f64 {
        (0..p.num_subs())
            .map(|j| max_abs_diff(&p.block(j).gather(&self.x), &self.ys[j]))
            .fold(0.0, f64::max)
    }

    pub fn max_stepsize(&self) -> f64 {
        self.stepsizes.iter().map(StepsizeVector::max).fold(0.0, f64::max)
    }

    fn reset_stepsizes(&mut self) {
        for a in &mut self.stepsizes {
            *a = StepsizeVector::ones(a.len());
        }
    }
}

fn block_sq_dist(p: &SeparableProblem, j: usize, x: &[f64], y: &[f64]) -> f64 {
    p.block(j)
        .as_slice()
        .iter()
        .zip(y)
        .fold(0.0, |acc, (&i, &v)| acc + (x[i] - v) * (x[i] - v))
}

/// `P_tau(x, y)` with fresh oracle calls (exactly `m` evaluations).
pub fn penalty_value(s: &PenaltyState, p: &SeparableProblem, counter: &mut EvalCounter) -> Result<f64> {
    s.check(p)?;
    let fy: Vec<f64> = (0..p.num_subs())
        .map(|j| p.evaluate_sub(j, &s.ys[j], counter))
        .collect::<Result<_>>()?;
    Ok(ordered_sum(&fy) + s.penalty_term(p))
}

/// `∇_x P_tau`, `g_i = tau Σ_{j : i ∈ S_j} (x_i - (y_j)_i)`. Uses no oracle calls.
pub fn penalty_grad_x(s: &PenaltyState, p: &SeparableProblem) -> Vec<f64> {
    let mut g = vec![0.0; p.dim()];
    for (sub, y) in p.subs().iter().zip(&s.ys) {
        for (&i, &v) in sub.block().as_slice().iter().zip(y) {
            g[i] += s.x[i] - v;
        }
    }
    for gi in &mut g {
        *gi *= s.tau;
    }
    g
}

/// Minimizer of `P_tau(·, y)` over the feasible region.
#[derive(Clone, Debug, PartialEq)]
pub struct XUpdate {
    pub x: Vec<f64>,
    /// False when the region is custom and the coverage counts differ, in
    /// which case the projected centroid only approximates the argmin.
    pub exact: bool,
}

/// Projects the centroid `ȳ_i = (1/c_i) Σ_{j : i ∈ S_j} (y_j)_i`.
pub fn x_update(p: &SeparableProblem, ys: &[Vec<f64>]) -> XUpdate {
    let mut centroid = vec![0.0; p.dim()];
    for (sub, y) in p.subs().iter().zip(ys) {
        for (&i, &v) in sub.block().as_slice().iter().zip(y) {
            centroid[i] += v;
        }
    }
    let cov = p.coverage_counts();
    for (c, &n) in centroid.iter_mut().zip(cov) {
        *c /= n as f64;
    }
    let exact = p.region().is_separable() || cov.iter().all(|&c| c == cov[0]);
    XUpdate {
        x: p.project(&centroid),
        exact,
    }
}

/// `||x - Π_X(x - g)||`.
pub fn stationarity_residual(x: &[f64], g: &[f64], region: &FeasibleRegion) -> f64 {
    let shifted: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    norm2_diff(x, &region.project(&shifted))
}

/// The two quantities tested by the inner stopping rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCheck {
    pub max_stepsize: f64,
    /// `xi / max(tau, 1)`.
    pub step_threshold: f64,
    pub residual: f64,
    pub xi: f64,
}

impl StopCheck {
    pub fn from_parts(max_stepsize: f64, tau: f64, residual: f64, xi: f64) -> Self {
        Self {
            max_stepsize,
            step_threshold: xi / tau.max(1.0),
            residual,
            xi,
        }
    }

    pub fn satisfied(&self) -> bool {
        self.max_stepsize <= self.step_threshold && self.residual <= self.xi
    }
}

/// Evaluates both clauses of the inner stopping rule on `s`.
pub fn stop_check(s: &PenaltyState, p: &SeparableProblem, xi: f64) -> StopCheck {
    let g = penalty_grad_x(s, p);
    StopCheck::from_parts(
        s.max_stepsize(),
        s.tau,
        stationarity_residual(&s.x, &g, p.region()),
        xi,
    )
}

pub fn inner_stop(s: &PenaltyState, p: &SeparableProblem, xi: f64) -> bool {
    stop_check(s, p, xi).satisfied()
}

/// Bookkeeping for one inner iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerRecord {
    pub outer: usize,
    pub inner: usize,
    pub tau: f64,
    /// `P(x^l, y^l)`.
    pub p_start: f64,
    /// `P(x^l, y^{l+1})` after the block searches.
    pub p_searched: f64,
    /// `P(x^{l+1}, y^{l+1})` after the x-update; `None` on the stopping iteration.
    pub p_updated: Option<f64>,
    /// Oracle calls spent by the block searches.
    pub search_evals: u64,
    pub expansions: u64,
    /// `Σ_j (2|S_j| + 1)`.
    pub cost_bound: u64,
    pub stop: StopCheck,
}

/// Limits guarding one call of [`dfam`].
#[derive(Clone, Copy, Debug, Default)]
pub struct InnerLimits {
    pub max_iters: Option<usize>,
    pub deadline: Option<Instant>,
}

#[derive(Clone, Debug)]
pub struct DfamOutcome {
    pub state: PenaltyState,
    pub inner_iters: usize,
    pub stop: StopCheck,
    pub cap_hit: bool,
    pub timed_out: bool,
    pub inexact_x_update: bool,
    pub records: Vec<InnerRecord>,
}

/// Block objective `f_j(w) + tau/2 ||anchor - w||²`.
struct PenalizedBlock<'a> {
    p: &'a SeparableProblem,
    j: usize,
    anchor: Vec<f64>,
    half_tau: f64,
    evals: u64,
    f_accepted: Option<f64>,
    scratch: Vec<f64>,
}

impl PenalizedBlock<'_> {
    fn penalty(&self, w: &[f64]) -> f64 {
        self.half_tau
            * self
                .anchor
                .iter()
                .zip(w)
                .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b))
    }
}

impl CoordinateOracle for PenalizedBlock<'_> {
    type Probe = f64;

    fn probe(&mut self, w: &[f64], i: usize, coord: f64) -> (f64, f64) {
        self.scratch.clear();
        self.scratch.extend_from_slice(w);
        self.scratch[i] = coord;
        let f = self.p.eval_unchecked(self.j, &self.scratch, &mut self.evals);
        let scratch = std::mem::take(&mut self.scratch);
        let value = f + self.penalty(&scratch);
        self.scratch = scratch;
        (value, f)
    }

    fn commit(&mut self, _i: usize, _coord: f64, f: f64) {
        self.f_accepted = Some(f);
    }
}

struct BlockResult {
    y: Vec<f64>,
    fy: f64,
    stepsizes: StepsizeVector,
    evals: u64,
    expansions: u64,
}

fn search_block(
    p: &SeparableProblem,
    j: usize,
    state: &PenaltyState,
    cfg: &SearchConfig,
) -> BlockResult {
    let mut oracle = PenalizedBlock {
        p,
        j,
        anchor: p.block(j).gather(&state.x),
        half_tau: 0.5 * state.tau,
        evals: 0,
        f_accepted: None,
        scratch: Vec::with_capacity(state.ys[j].len()),
    };
    let base = state.fy[j] + oracle.penalty(&state.ys[j]);
    let out = search_unchecked(
        &mut oracle,
        state.ys[j].clone(),
        base,
        state.stepsizes[j].clone(),
        cfg,
        None,
    );
    BlockResult {
        y: out.point,
        fy: oracle.f_accepted.unwrap_or(state.fy[j]),
        stepsizes: out.stepsizes,
        evals: oracle.evals,
        expansions: out.expansions,
    }
}

/// Derivative-free alternate minimization of `P_tau` from `start`.
///
/// Each inner iteration searches every block copy against the current `x`,
/// then tests the stopping rule with the new tentative stepsizes and the
/// x-residual of the current iterate. When the rule holds the current iterate
/// is returned, carrying the new stepsizes; otherwise `x` is replaced by the
/// projected centroid of the new copies.
#[allow(clippy::too_many_arguments)]
pub fn dfam(
    p: &SeparableProblem,
    start: PenaltyState,
    xi: f64,
    cfg: &SearchConfig,
    workers: &Workers,
    counter: &mut EvalCounter,
    limits: InnerLimits,
    outer: usize,
) -> Result<DfamOutcome> {
    start.check(p)?;
    cfg.validate()?;
    if !(start.tau > 0.0) {
        return Err(Error::Usage("penalty parameter must be positive".into()));
    }
    if !p.region().contains(&start.x, 0.0) {
        return Err(Error::Usage("dfam start point is not feasible".into()));
    }
    let m = p.num_subs();
    let cost_bound: u64 = p.subs().iter().map(|s| 2 * s.block().len() as u64 + 1).sum();
    let mut state = start;
    let mut p_current = state.cached_value(p);
    let mut records = Vec::new();
    let mut inexact = false;
    let mut ell = 0usize;

    loop {
        if limits.max_iters.is_some_and(|cap| ell >= cap) || deadline_passed(limits.deadline) {
            let stop = stop_check(&state, p, xi);
            return Ok(DfamOutcome {
                state,
                inner_iters: ell,
                stop,
                cap_hit: limits.max_iters.is_some_and(|cap| ell >= cap),
                timed_out: deadline_passed(limits.deadline),
                inexact_x_update: inexact,
                records,
            });
        }

        let results = workers.map(m, |j| search_block(p, j, &state, cfg));

        let mut search_evals = 0;
        let mut expansions = 0;
        let mut next_ys = Vec::with_capacity(m);
        let mut next_fy = Vec::with_capacity(m);
        let mut next_steps = Vec::with_capacity(m);
        for (j, r) in results.into_iter().enumerate() {
            counter.add(j, r.evals);
            search_evals += r.evals;
            expansions += r.expansions;
            next_ys.push(r.y);
            next_fy.push(r.fy);
            next_steps.push(r.stepsizes);
        }

        // The stopping rule pairs the new stepsizes with the current iterate.
        state.stepsizes = next_steps;
        let stop = stop_check(&state, p, xi);

        let searched = PenaltyState {
            x: state.x.clone(),
            ys: next_ys,
            fy: next_fy,
            tau: state.tau,
            stepsizes: state.stepsizes.clone(),
        };
        let p_searched = searched.cached_value(p);
        let mut record = InnerRecord {
            outer,
            inner: ell,
            tau: state.tau,
            p_start: p_current,
            p_searched,
            p_updated: None,
            search_evals,
            expansions,
            cost_bound,
            stop,
        };

        if stop.satisfied() {
            records.push(record);
            return Ok(DfamOutcome {
                state,
                inner_iters: ell + 1,
                stop,
                cap_hit: false,
                timed_out: false,
                inexact_x_update: inexact,
                records,
            });
        }

        let update = x_update(p, &searched.ys);
        inexact |= !update.exact;
        state = PenaltyState {
            x: update.x,
            ..searched
        };
        p_current = state.cached_value(p);
        record.p_updated = Some(p_current);
        records.push(record);
        ell += 1;
    }
}

fn deadline_passed(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// State returned by one outer iteration.
#[derive(Clone, Debug)]
pub struct OuterRecord {
    pub k: usize,
    pub tau: f64,
    pub xi: f64,
    /// Whether the subproblem started from the previous solution.
    pub warm_start: bool,
    /// Penalty value of the starting point.
    pub p_start: f64,
    pub inner_iters: usize,
    pub state: PenaltyState,
    pub stop: StopCheck,
    /// True when the inner loop ended through its stopping rule.
    pub stopped_by_rule: bool,
}

/// Complete output of [`sequential_penalty`].
#[derive(Clone, Debug)]
pub struct PenaltyRun {
    pub report: SolveReport,
    /// Reference value `f(x0) = P_{tau_0}(x0, y0)`.
    pub f0: f64,
    pub outer: Vec<OuterRecord>,
    pub inner: Vec<InnerRecord>,
}

/// Sequential penalty method with derivative-free alternate minimization.
pub fn sequential_penalty(
    p: &SeparableProblem,
    params: &PenaltyParams,
    cfg: &SearchConfig,
    workers: usize,
) -> Result<PenaltyRun> {
    params.validate()?;
    cfg.validate()?;
    let workers = Workers::new(workers)?;
    let started = Instant::now();
    let deadline = params.wall_clock_limit.map(|d| started + d);
    let inner_cap = params
        .inner_cap
        .unwrap_or(10 * p.dim() * p.num_subs())
        .max(1);
    if !p.region().contains(p.x0(), 0.0) {
        return Err(Error::Usage("start point is not feasible".into()));
    }

    let m = p.num_subs();
    let mut counter = EvalCounter::new(m);
    let fy0 = parallel_sub_values(p, p.x0(), &workers, &mut counter);
    let f0 = ordered_sum(&fy0);
    if !f0.is_finite() {
        return Err(Error::Evaluation(format!("f(x0) = {f0} is not finite")));
    }
    let initial = PenaltyState::consistent(p, p.x0().to_vec(), fy0, params.tau0);

    let mut history = Vec::new();
    push_history(&mut history, counter.total(), f0);
    let mut trace = vec![TraceRow {
        k: 0,
        tau: Some(params.tau0),
        inner_iters: Some(0),
        evals: counter.total(),
        f: f0,
        residual: Some(stationarity_residual(
            &initial.x,
            &penalty_grad_x(&initial, p),
            p.region(),
        )),
        feasibility_gap: Some(0.0),
    }];

    let mut outer_records = Vec::new();
    let mut inner_records = Vec::new();
    let mut prev = initial.clone();
    let mut f_last;
    let mut inexact = false;
    let mut cap_hit = false;
    let mut k = 0usize;

    let termination = loop {
        k += 1;
        let tau = params.tau_at(k);
        let xi = params.xi_at(k);

        let mut candidate = PenaltyState { tau, ..prev.clone() };
        let warm_start = candidate.cached_value(p) <= f0;
        if !warm_start {
            candidate = PenaltyState {
                tau,
                ..initial.clone()
            };
        }
        candidate.reset_stepsizes();
        let p_start = candidate.cached_value(p);

        let out = dfam(
            p,
            candidate,
            xi,
            cfg,
            &workers,
            &mut counter,
            InnerLimits {
                max_iters: Some(inner_cap),
                deadline,
            },
            k,
        )?;
        inexact |= out.inexact_x_update;
        cap_hit |= out.cap_hit;
        inner_records.extend(out.records);
        if out.cap_hit {
            log::warn!("{}: inner iteration cap {inner_cap} reached at k = {k}", p.name());
        }

        let state = out.state;
        let fx = parallel_sub_values(p, &state.x, &workers, &mut counter);
        f_last = ordered_sum(&fx);
        push_history(&mut history, counter.total(), f_last);
        trace.push(TraceRow {
            k,
            tau: Some(tau),
            inner_iters: Some(out.inner_iters),
            evals: counter.total(),
            f: f_last,
            residual: Some(out.stop.residual),
            feasibility_gap: Some(state.feasibility_gap(p)),
        });
        let moved = norm2_diff(&state.x, &prev.x);
        outer_records.push(OuterRecord {
            k,
            tau,
            xi,
            warm_start,
            p_start,
            inner_iters: out.inner_iters,
            state: state.clone(),
            stop: out.stop,
            stopped_by_rule: !out.cap_hit && !out.timed_out,
        });
        prev = state;

        if out.timed_out || deadline_passed(deadline) {
            break Termination::WallClock;
        }
        if moved <= params.outer_step_tol {
            break Termination::OuterStepTol;
        }
        if k >= params.max_outer {
            break Termination::MaxOuter;
        }
    };

    Ok(PenaltyRun {
        report: SolveReport {
            final_x: prev.x,
            final_f: f_last,
            history,
            termination,
            outer_iters: k,
            evals: counter,
            trace,
            inexact_x_update: inexact,
            inner_cap_hit: cap_hit,
        },
        f0,
        outer: outer_records,
        inner: inner_records,
    })
}

/// `f_j(x_{S_j})` for every block, evaluated on the worker pool.
pub(crate) fn parallel_sub_values(
    p: &SeparableProblem,
    x: &[f64],
    workers: &Workers,
    counter: &mut EvalCounter,
) -> Vec<f64> {
    let vals = workers.map(p.num_subs(), |j| {
        let mut n = 0u64;
        let v = p.eval_unchecked(j, &p.block(j).gather(x), &mut n);
        (v, n)
    });
    vals.into_iter()
        .enumerate()
        .map(|(j, (v, n))| {
            counter.add(j, n);
            v
        })
        .collect()
}
