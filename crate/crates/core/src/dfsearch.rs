//! Coordinate derivative-free line search with extrapolation.
//!
//! One call visits the coordinates in ascending order. Along each coordinate
//! the tentative step is tried in the `+e_i` direction and then in the `-e_i`
//! direction; a trial is accepted when it gives the sufficient decrease
//! `g(w + t d) <= g(w) - gamma t^2`. An accepted step is expanded by factors
//! `1/theta` for as long as the test keeps holding. The tentative step of the
//! coordinate becomes the accepted step, or is contracted by `theta` when both
//! directions fail.
//!
//! The same routine drives the block searches of the penalty decomposition
//! solver and the box-feasible coordinate search used as a baseline.

use crate::error::{Error, Result};

/// Line-search constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Sufficient decrease coefficient.
    pub gamma: f64,
    /// Contraction factor in `(0, 1)`; expansions use `1 / theta`.
    pub theta: f64,
    /// Upper bound on the number of expansions after an accepted step.
    pub max_expansions: u32,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-6,
            theta: 0.5,
            max_expansions: 50,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Usage(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Usage(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if self.max_expansions == 0 {
            return Err(Error::Usage("max_expansions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-coordinate tentative stepsizes carried between calls.
#[derive(Clone, Debug, PartialEq)]
pub struct StepsizeVector(Vec<f64>);

impl StepsizeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::Usage("tentative stepsizes must be positive and finite".into()));
        }
        Ok(Self(values))
    }

    /// All entries equal to 1.
    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest entry (0 for an empty vector).
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Box restricted to the searched coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Bounds<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

impl<'a> Bounds<'a> {
    pub fn new(lower: &'a [f64], upper: &'a [f64]) -> Self {
        Self { lower, upper }
    }

    fn max_step(&self, w: &[f64], i: usize, sign: f64) -> f64 {
        let room = if sign > 0.0 {
            self.upper[i] - w[i]
        } else {
            w[i] - self.lower[i]
        };
        room.max(0.0)
    }

    fn clamp(&self, i: usize, v: f64) -> f64 {
        v.max(self.lower[i]).min(self.upper[i])
    }
}

/// Objective seen by the search, queried one coordinate change at a time.
///
/// `probe` returns the value at `w` with coordinate `i` replaced by `coord`,
/// plus a token that is handed back through `commit` if that trial becomes
/// the new iterate. Oracles that keep partial values (for instance cached
/// sub-function values) use the token to update their state without
/// re-evaluating anything.
pub trait CoordinateOracle {
    type Probe;

    fn probe(&mut self, w: &[f64], i: usize, coord: f64) -> (f64, Self::Probe);

    fn commit(&mut self, _i: usize, _coord: f64, _probe: Self::Probe) {}
}

/// Adapts a plain closure on the searched vector.
pub struct FnOracle<F> {
    f: F,
    scratch: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> FnOracle<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            scratch: Vec::new(),
        }
    }

    pub fn value(&mut self, w: &[f64]) -> f64 {
        (self.f)(w)
    }
}

impl<F: FnMut(&[f64]) -> f64> CoordinateOracle for FnOracle<F> {
    type Probe = ();

    fn probe(&mut self, w: &[f64], i: usize, coord: f64) -> (f64, ()) {
        self.scratch.clear();
        self.scratch.extend_from_slice(w);
        self.scratch[i] = coord;
        ((self.f)(&self.scratch), ())
    }
}

/// Result of one pass over the coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub point: Vec<f64>,
    /// Objective value at `point`, known without extra evaluations.
    pub value: f64,
    pub stepsizes: StepsizeVector,
    /// Signed accepted step per coordinate, 0 where both directions failed.
    pub accepted: Vec<f64>,
    /// Total oracle calls, including the base value when it was computed here.
    pub evals: u64,
    /// Oracle calls spent on the initial `±` polls.
    pub polls: u64,
    /// Oracle calls spent on expansion trials.
    pub expansions: u64,
}

impl SearchOutcome {
    pub fn any_expansion(&self) -> bool {
        self.expansions > 0
    }
}

/// Runs one search pass over `g` starting at `w`.
///
/// Computes `g(w)` first; use [`search_from`] when that value is already
/// known.
pub fn df_search<F>(
    g: F,
    w: &[f64],
    stepsizes: &StepsizeVector,
    cfg: &SearchConfig,
    bounds: Option<Bounds<'_>>,
) -> Result<SearchOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    check_inputs(w, stepsizes, cfg, bounds)?;
    let mut oracle = FnOracle::new(g);
    let base = oracle.value(w);
    let mut out = search_unchecked(&mut oracle, w.to_vec(), base, stepsizes.clone(), cfg, bounds);
    out.evals += 1;
    Ok(out)
}

/// Runs one search pass given `base = g(w)`.
pub fn search_from<O: CoordinateOracle>(
    oracle: &mut O,
    w: Vec<f64>,
    base: f64,
    stepsizes: StepsizeVector,
    cfg: &SearchConfig,
    bounds: Option<Bounds<'_>>,
) -> Result<SearchOutcome> {
    check_inputs(&w, &stepsizes, cfg, bounds)?;
    Ok(search_unchecked(oracle, w, base, stepsizes, cfg, bounds))
}

fn check_inputs(
    w: &[f64],
    stepsizes: &StepsizeVector,
    cfg: &SearchConfig,
    bounds: Option<Bounds<'_>>,
) -> Result<()> {
    cfg.validate()?;
    if w.is_empty() {
        return Err(Error::Usage("cannot search an empty vector".into()));
    }
    if stepsizes.len() != w.len() {
        return Err(Error::Usage(format!(
            "{} stepsizes for {} coordinates",
            stepsizes.len(),
            w.len()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage("search start is not finite".into()));
    }
    if let Some(b) = bounds {
        if b.lower.len() != w.len() || b.upper.len() != w.len() {
            return Err(Error::Usage("bounds do not match the searched vector".into()));
        }
        if (0..w.len()).any(|i| w[i] < b.lower[i] || w[i] > b.upper[i]) {
            return Err(Error::Usage("search start violates the bounds".into()));
        }
    }
    Ok(())
}

pub(crate) fn search_unchecked<O: CoordinateOracle>(
    oracle: &mut O,
    mut w: Vec<f64>,
    mut base: f64,
    stepsizes: StepsizeVector,
    cfg: &SearchConfig,
    bounds: Option<Bounds<'_>>,
) -> SearchOutcome {
    let mut tentative = stepsizes.0;
    let mut accepted = vec![0.0; w.len()];
    let mut polls = 0u64;
    let mut expansions = 0u64;

    for i in 0..w.len() {
        let alpha = tentative[i];
        let mut moved = false;
        for sign in [1.0, -1.0] {
            let room = bounds.map_or(f64::INFINITY, |b| b.max_step(&w, i, sign));
            let mut step = alpha.min(room);
            if step <= 0.0 {
                continue;
            }
            let mut at_bound = step < alpha;
            let trial = |t: f64| {
                let c = w[i] + sign * t;
                bounds.map_or(c, |b| b.clamp(i, c))
            };

            let coord = trial(step);
            if coord == w[i] {
                // the step vanishes in rounding; f(w) <= f(w) - gamma t^2 cannot hold
                continue;
            }
            let (value, token) = oracle.probe(&w, i, coord);
            polls += 1;
            if !sufficient(value, base, step, cfg.gamma) {
                continue;
            }

            let mut best = (step, coord, value, token);
            let mut j = 1;
            while !at_bound && j <= cfg.max_expansions {
                step = alpha / cfg.theta.powi(j as i32);
                if step > room {
                    step = room;
                    at_bound = true;
                }
                if step <= best.0 {
                    break;
                }
                let coord = trial(step);
                if coord == best.1 {
                    break;
                }
                let (value, token) = oracle.probe(&w, i, coord);
                expansions += 1;
                if !sufficient(value, base, step, cfg.gamma) {
                    break;
                }
                best = (step, coord, value, token);
                j += 1;
            }

            let (step, coord, value, token) = best;
            oracle.commit(i, coord, token);
            w[i] = coord;
            base = value;
            accepted[i] = sign * step;
            tentative[i] = step;
            moved = true;
            break;
        }
        if !moved {
            tentative[i] = cfg.theta * alpha;
        }
    }

    SearchOutcome {
        point: w,
        value: base,
        stepsizes: StepsizeVector(tentative),
        accepted,
        evals: polls + expansions,
        polls,
        expansions,
    }
}

#[inline]
fn sufficient(value: f64, base: f64, step: f64, gamma: f64) -> bool {
    value.is_finite() && value <= base - gamma * step * step
}
