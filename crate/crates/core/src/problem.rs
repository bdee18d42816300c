//! Coordinate partially separable problems.
//!
//! A [`SeparableProblem`] is a sum of black-box sub-functions `f_j`, each of
//! which reads only the coordinates listed in its [`IndexSet`]. The problem
//! also carries the feasible region (with its Euclidean projection) and the
//! start point. Every oracle call goes through [`SeparableProblem::evaluate_sub`]
//! so that solvers can be compared on the number of individual sub-function
//! evaluations they spend.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, Result};

/// Black-box scalar oracle of a sub-function.
pub type Oracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Analytic gradient of a sub-function. Only tests and benchmark checks use it.
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// User-supplied Euclidean projection onto a closed convex set.
pub type ProjectionFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Strictly increasing, non-empty list of 0-based coordinate indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidProblem("index set is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProblem(format!(
                "index set {indices:?} is not strictly increasing"
            )));
        }
        Ok(Self(indices))
    }

    /// Builds `{start, start + 1, ..., start + len - 1}`.
    pub fn range(start: usize, len: usize) -> Result<Self> {
        Self::new((start..start + len).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("index sets are non-empty")
    }

    /// Position of coordinate `i` inside the block, if present.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.position(i).is_some()
    }

    /// Restriction `x_S` of a full vector to this block.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| x[i]).collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// One term `f_j(x_{S_j})` of the objective.
#[derive(Clone)]
pub struct SubFunction {
    block: IndexSet,
    oracle: Oracle,
    gradient: Option<GradientFn>,
}

impl SubFunction {
    pub fn new(block: IndexSet, oracle: Oracle) -> Self {
        Self {
            block,
            oracle,
            gradient: None,
        }
    }

    pub fn from_fn<F>(block: IndexSet, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(block, Arc::new(f))
    }

    /// Attaches an analytic gradient used for verification only.
    pub fn with_gradient(mut self, gradient: GradientFn) -> Self {
        self.gradient = Some(gradient);
        self
    }

    pub fn block(&self) -> &IndexSet {
        &self.block
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Analytic gradient at `y`, if one was supplied.
    pub fn test_gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(y))
    }

    fn call(&self, y: &[f64]) -> f64 {
        (self.oracle)(y)
    }
}

impl fmt::Debug for SubFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubFunction")
            .field("block", &self.block)
            .field("gradient", &self.gradient.is_some())
            .finish()
    }
}

/// Closed convex feasible set `X` together with its projection.
#[derive(Clone)]
pub enum FeasibleRegion {
    Unbounded,
    /// Componentwise bounds; infinite bounds are allowed.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Any set whose exact Euclidean projection is available.
    Custom(ProjectionFn),
}

impl FeasibleRegion {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidProblem(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidProblem(format!(
                "box bound {i} is empty: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        Ok(Self::Box { lower, upper })
    }

    /// Same interval `[lo, hi]` on every one of `n` coordinates.
    pub fn uniform_box(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; n], vec![hi; n])
    }

    pub fn custom<F>(projection: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::Custom(Arc::new(projection))
    }

    /// Bounds when the region is a box.
    pub fn bounds(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Self::Box { lower, upper } => Some((lower, upper)),
            _ => None,
        }
    }

    /// True when the projection is separable by coordinate (box or whole space).
    pub fn is_separable(&self) -> bool {
        !matches!(self, Self::Custom(_))
    }

    /// Euclidean projection `Π_X(v)`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Self::Unbounded => v.to_vec(),
            Self::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&vi, (&lo, &hi))| vi.max(lo).min(hi))
                .collect(),
            Self::Custom(p) => p(v),
        }
    }

    /// True when `x` lies in the region, up to `tol` in the max norm.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Self::Unbounded => true,
            Self::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&xi, (&lo, &hi))| xi >= lo - tol && xi <= hi + tol),
            Self::Custom(p) => max_abs_diff(&p(x), x) <= tol,
        }
    }

    /// Spot-checks idempotence and nonexpansiveness of the projection on the
    /// given sample points (consecutive pairs are compared).
    pub fn check_projection(&self, samples: &[Vec<f64>], tol: f64) -> Result<()> {
        for (k, v) in samples.iter().enumerate() {
            let p = self.project(v);
            let pp = self.project(&p);
            if max_abs_diff(&p, &pp) > tol {
                return Err(Error::InvalidProblem(format!(
                    "projection is not idempotent at sample {k}"
                )));
            }
        }
        for (k, pair) in samples.windows(2).enumerate() {
            let (pu, pv) = (self.project(&pair[0]), self.project(&pair[1]));
            if norm2_diff(&pu, &pv) > norm2_diff(&pair[0], &pair[1]) + tol {
                return Err(Error::InvalidProblem(format!(
                    "projection expands the distance between samples {k} and {}",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for FeasibleRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unbounded => write!(f, "Unbounded"),
            Self::Box { lower, upper } => f
                .debug_struct("Box")
                .field("lower", lower)
                .field("upper", upper)
                .finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Receives one tick per oracle invocation of sub-function `j`.
pub trait EvalTally {
    fn tally(&mut self, j: usize);
}

/// Plain tally of calls, for workers that touch a single sub-function.
impl EvalTally for u64 {
    fn tally(&mut self, _j: usize) {
        *self += 1;
    }
}

/// Per-sub-function evaluation counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalCounter {
    per_sub: Vec<u64>,
    total: u64,
}

impl EvalCounter {
    pub fn new(m: usize) -> Self {
        Self {
            per_sub: vec![0; m],
            total: 0,
        }
    }

    pub fn per_sub(&self) -> &[u64] {
        &self.per_sub
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Adds `count` evaluations of sub-function `j`.
    pub fn add(&mut self, j: usize, count: u64) {
        self.per_sub[j] += count;
        self.total += count;
    }

    /// Componentwise sum with another counter of the same length.
    pub fn merge(&mut self, other: &EvalCounter) {
        assert_eq!(self.per_sub.len(), other.per_sub.len());
        for (a, b) in self.per_sub.iter_mut().zip(&other.per_sub) {
            *a += b;
        }
        self.total += other.total;
    }
}

impl EvalTally for EvalCounter {
    fn tally(&mut self, j: usize) {
        self.add(j, 1);
    }
}

/// Lock-free counter shared between worker threads.
#[derive(Debug)]
pub struct SharedEvalCounter {
    per_sub: Vec<AtomicU64>,
}

impl SharedEvalCounter {
    pub fn new(m: usize) -> Self {
        Self {
            per_sub: (0..m).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    pub fn snapshot(&self) -> EvalCounter {
        let mut c = EvalCounter::new(self.per_sub.len());
        for (j, a) in self.per_sub.iter().enumerate() {
            c.add(j, a.load(Ordering::Relaxed));
        }
        c
    }
}

impl EvalTally for &SharedEvalCounter {
    fn tally(&mut self, j: usize) {
        self.per_sub[j].fetch_add(1, Ordering::Relaxed);
    }
}

/// Minimize `Σ_j f_j(x_{S_j})` over a feasible region.
#[derive(Clone, Debug)]
pub struct SeparableProblem {
    name: String,
    n: usize,
    subs: Vec<SubFunction>,
    region: FeasibleRegion,
    x0: Vec<f64>,
    coverage: Vec<usize>,
    incidence: Vec<Vec<usize>>,
    eval_delay: Option<Duration>,
}

impl SeparableProblem {
    pub fn new(
        n: usize,
        subs: Vec<SubFunction>,
        region: FeasibleRegion,
        x0: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        if subs.is_empty() {
            return Err(Error::InvalidProblem("at least one sub-function is required".into()));
        }
        if x0.len() != n {
            return Err(Error::InvalidProblem(format!(
                "start point has length {}, expected {n}",
                x0.len()
            )));
        }
        if let Some((lower, _)) = region.bounds() {
            if lower.len() != n {
                return Err(Error::InvalidProblem(format!(
                    "box has dimension {}, expected {n}",
                    lower.len()
                )));
            }
        }
        let mut coverage = vec![0usize; n];
        let mut incidence = vec![Vec::new(); n];
        for (j, sub) in subs.iter().enumerate() {
            if sub.block.max() >= n {
                return Err(Error::InvalidProblem(format!(
                    "block {j} references coordinate {} but n = {n}",
                    sub.block.max()
                )));
            }
            for &i in sub.block.as_slice() {
                coverage[i] += 1;
                incidence[i].push(j);
            }
        }
        if let Some(i) = coverage.iter().position(|&c| c == 0) {
            return Err(Error::InvalidProblem(format!(
                "coordinate {i} does not appear in any block"
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("start point is not finite".into()));
        }
        if max_abs_diff(&region.project(&x0), &x0) > 0.0 {
            return Err(Error::InvalidProblem("start point is not feasible".into()));
        }
        Ok(Self {
            name: String::from("problem"),
            n,
            subs,
            region,
            x0,
            coverage,
            incidence,
            eval_delay: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Sleeps for `delay` on every sub-function evaluation, emulating
    /// expensive black boxes in wall-time studies.
    pub fn with_eval_delay(mut self, delay: Option<Duration>) -> Self {
        self.eval_delay = delay;
        self
    }

    /// Replaces the start point; it must be feasible.
    pub fn with_start(self, x0: Vec<f64>) -> Result<Self> {
        let name = self.name.clone();
        let delay = self.eval_delay;
        Ok(Self::new(self.n, self.subs, self.region, x0)?
            .with_name(name)
            .with_eval_delay(delay))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_subs(&self) -> usize {
        self.subs.len()
    }

    pub fn subs(&self) -> &[SubFunction] {
        &self.subs
    }

    pub fn block(&self, j: usize) -> &IndexSet {
        &self.subs[j].block
    }

    pub fn region(&self) -> &FeasibleRegion {
        &self.region
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn eval_delay(&self) -> Option<Duration> {
        self.eval_delay
    }

    /// `c_i = |{j : i ∈ S_j}|`.
    pub fn coverage_counts(&self) -> &[usize] {
        &self.coverage
    }

    /// Sub-functions whose block contains coordinate `i`, ascending.
    pub fn affected_blocks(&self, i: usize) -> &[usize] {
        &self.incidence[i]
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.region.project(v)
    }

    /// Evaluates `f_j(y)` and records one evaluation of `j`.
    ///
    /// A non-finite oracle value is returned as is; solvers treat it as a
    /// failed sufficient decrease test.
    pub fn evaluate_sub<C: EvalTally>(&self, j: usize, y: &[f64], counter: &mut C) -> Result<f64> {
        let sub = self.subs.get(j).ok_or_else(|| {
            Error::Usage(format!("sub-function index {j} out of range (m = {})", self.subs.len()))
        })?;
        if y.len() != sub.block.len() {
            return Err(Error::Usage(format!(
                "sub-function {j} expects {} inputs, got {}",
                sub.block.len(),
                y.len()
            )));
        }
        Ok(self.eval_unchecked(j, y, counter))
    }

    pub(crate) fn eval_unchecked<C: EvalTally>(&self, j: usize, y: &[f64], counter: &mut C) -> f64 {
        if let Some(d) = self.eval_delay {
            std::thread::sleep(d);
        }
        counter.tally(j);
        self.subs[j].call(y)
    }

    /// Values of every `f_j(x_{S_j})`, costing exactly `m` evaluations.
    pub fn sub_values<C: EvalTally>(&self, x: &[f64], counter: &mut C) -> Result<Vec<f64>> {
        self.check_full(x)?;
        Ok((0..self.subs.len())
            .map(|j| {
                let y = self.subs[j].block.gather(x);
                self.eval_unchecked(j, &y, counter)
            })
            .collect())
    }

    /// `f(x) = Σ_j f_j(x_{S_j})`, costing exactly `m` evaluations.
    pub fn evaluate_full<C: EvalTally>(&self, x: &[f64], counter: &mut C) -> Result<f64> {
        Ok(ordered_sum(&self.sub_values(x, counter)?))
    }

    /// Gradient of `f` assembled from the sub-function test gradients.
    /// Returns `None` when some sub-function has no gradient.
    pub fn test_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; self.n];
        for sub in &self.subs {
            let gj = sub.test_gradient(&sub.block.gather(x))?;
            for (&i, v) in sub.block.as_slice().iter().zip(gj) {
                g[i] += v;
            }
        }
        Some(g)
    }

    /// `||x - P(x - grad f(x))||_inf` from the test gradients, `None` when
    /// some sub-function has no gradient.
    pub fn projected_gradient_inf(&self, x: &[f64]) -> Option<f64> {
        let g = self.test_gradient(x)?;
        let shifted: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        Some(max_abs_diff(x, &self.region.project(&shifted)))
    }

    /// `f(x)` computed without touching any counter (verification only).
    pub fn value_uncounted(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self
            .subs
            .iter()
            .map(|s| s.call(&s.block.gather(x)))
            .collect();
        ordered_sum(&vals)
    }

    fn check_full(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Usage(format!(
                "point has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Left-to-right sum; every code path that totals sub-function values uses it
/// so that equal inputs give bitwise equal totals.
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v)
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::AtomicUsize;

    fn sum_sq() -> impl Fn(&[f64]) -> f64 + Send + Sync {
        |y: &[f64]| y.iter().map(|v| v * v).sum()
    }

    fn rosen2(y: &[f64]) -> f64 {
        100.0 * (y[1] - y[0] * y[0]).powi(2) + (1.0 - y[0]).powi(2)
    }

    fn chained_rosenbrock3() -> SeparableProblem {
        let subs = vec![
            SubFunction::from_fn(IndexSet::new(vec![0, 1]).unwrap(), rosen2),
            SubFunction::from_fn(IndexSet::new(vec![1, 2]).unwrap(), rosen2),
        ];
        SeparableProblem::new(3, subs, FeasibleRegion::Unbounded, vec![0.0; 3]).unwrap()
    }

    #[test]
    fn evaluate_sub_counts_once() {
        let p = SeparableProblem::new(
            2,
            vec![SubFunction::from_fn(IndexSet::range(0, 2).unwrap(), sum_sq())],
            FeasibleRegion::Unbounded,
            vec![0.0, 0.0],
        )
        .unwrap();
        let mut c = EvalCounter::new(1);
        assert_eq!(p.evaluate_sub(0, &[1.0, 1.0], &mut c).unwrap(), 2.0);
        assert_eq!(c.total(), 1);
        assert_eq!(c.per_sub(), &[1]);
    }

    #[test]
    fn projected_gradient_residual() {
        let sub = SubFunction::from_fn(IndexSet::range(0, 2).unwrap(), sum_sq())
            .with_gradient(Arc::new(|y: &[f64]| y.iter().map(|v| 2.0 * v).collect()));
        let region = FeasibleRegion::uniform_box(2, 1.0, 2.0).unwrap();
        let p = SeparableProblem::new(2, vec![sub], region, vec![1.0, 1.0]).unwrap();
        // the gradient (2, 2) points out of the box at its lower corner
        assert_eq!(p.projected_gradient_inf(&[1.0, 1.0]), Some(0.0));
        assert_eq!(p.projected_gradient_inf(&[1.5, 1.0]), Some(0.5));
        assert_eq!(chained_rosenbrock3().projected_gradient_inf(&[1.0; 3]), None);
    }

    #[test]
    fn rosenbrock_block_values() {
        let p = chained_rosenbrock3();
        let mut c = EvalCounter::new(2);
        assert_eq!(p.evaluate_sub(0, &[1.0, 1.0], &mut c).unwrap(), 0.0);
        assert_eq!(p.evaluate_sub(0, &[0.0, 0.0], &mut c).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_sub_rejects_bad_index() {
        let p = chained_rosenbrock3();
        let mut c = EvalCounter::new(2);
        assert!(matches!(p.evaluate_sub(2, &[0.0, 0.0], &mut c), Err(Error::Usage(_))));
        assert!(matches!(p.evaluate_sub(0, &[0.0], &mut c), Err(Error::Usage(_))));
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn non_finite_values_are_returned() {
        let p = SeparableProblem::new(
            1,
            vec![SubFunction::from_fn(IndexSet::range(0, 1).unwrap(), |_| f64::NAN)],
            FeasibleRegion::Unbounded,
            vec![0.0],
        )
        .unwrap();
        let mut c = EvalCounter::new(1);
        assert!(p.evaluate_sub(0, &[0.0], &mut c).unwrap().is_nan());
        assert_eq!(c.total(), 1);
    }

    #[test]
    fn evaluate_full_chained() {
        let p = chained_rosenbrock3();
        let mut c = EvalCounter::new(2);
        assert_eq!(p.evaluate_full(&[1.0, 1.0, 1.0], &mut c).unwrap(), 0.0);
        assert_eq!(p.evaluate_full(&[0.0, 0.0, 0.0], &mut c).unwrap(), 2.0);
        assert_eq!(c.total(), 4);
        let before = c.total();
        assert!(p.evaluate_full(p.x0(), &mut c).unwrap().is_finite());
        assert_eq!(c.total(), before + 2);
    }

    #[test]
    fn counter_matches_spy_oracle() {
        let calls = Arc::new(AtomicUsize::new(0));
        let spy = {
            let calls = calls.clone();
            move |y: &[f64]| {
                calls.fetch_add(1, Ordering::SeqCst);
                y[0] * y[0]
            }
        };
        let subs = (0..3)
            .map(|i| SubFunction::from_fn(IndexSet::range(i, 1).unwrap(), spy.clone()))
            .collect();
        let p = SeparableProblem::new(3, subs, FeasibleRegion::Unbounded, vec![0.0; 3]).unwrap();
        let mut c = EvalCounter::new(3);
        for k in 0..7 {
            p.evaluate_sub(k % 3, &[k as f64], &mut c).unwrap();
            p.evaluate_full(&[1.0, 2.0, 3.0], &mut c).unwrap();
        }
        assert_eq!(c.total() as usize, calls.load(Ordering::SeqCst));
        assert_eq!(c.total(), c.per_sub().iter().sum::<u64>());
    }

    #[test]
    fn shared_and_local_counters_agree() {
        let p = chained_rosenbrock3();
        let shared = SharedEvalCounter::new(2);
        let mut local = EvalCounter::new(2);
        std::thread::scope(|s| {
            for t in 0..4 {
                let p = &p;
                let shared = &shared;
                s.spawn(move || {
                    let mut handle = shared;
                    for _ in 0..25 {
                        p.evaluate_sub(t % 2, &[0.5, 0.5], &mut handle).unwrap();
                    }
                });
            }
        });
        let mut parts = vec![EvalCounter::new(2); 4];
        for (t, part) in parts.iter_mut().enumerate() {
            for _ in 0..25 {
                p.evaluate_sub(t % 2, &[0.5, 0.5], part).unwrap();
            }
        }
        for part in &parts {
            local.merge(part);
        }
        assert_eq!(shared.snapshot(), local);
        assert_eq!(local.total(), 100);
    }

    #[test]
    fn projection_examples() {
        let b = FeasibleRegion::uniform_box(2, 0.0, 2.0).unwrap();
        assert_eq!(b.project(&[3.0, -1.0]), vec![2.0, 0.0]);
        assert_eq!(b.project(&[1.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(FeasibleRegion::Unbounded.project(&[5.0, 5.0]), vec![5.0, 5.0]);
    }

    #[test]
    fn empty_box_rejected() {
        assert!(FeasibleRegion::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleRegion::boxed(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn coverage_and_incidence() {
        let p = chained_rosenbrock3();
        assert_eq!(p.coverage_counts(), &[1, 2, 1]);
        assert_eq!(p.affected_blocks(1), &[0, 1]);
        assert_eq!(p.affected_blocks(0), &[0]);

        let full = SeparableProblem::new(
            3,
            vec![
                SubFunction::from_fn(IndexSet::range(0, 3).unwrap(), sum_sq()),
                SubFunction::from_fn(IndexSet::range(0, 3).unwrap(), sum_sq()),
            ],
            FeasibleRegion::Unbounded,
            vec![0.0; 3],
        )
        .unwrap();
        assert_eq!(full.coverage_counts(), &[2, 2, 2]);

        let disjoint = SeparableProblem::new(
            4,
            (0..2)
                .map(|j| SubFunction::from_fn(IndexSet::range(2 * j, 2).unwrap(), sum_sq()))
                .collect(),
            FeasibleRegion::Unbounded,
            vec![0.0; 4],
        )
        .unwrap();
        for i in 0..4 {
            assert_eq!(disjoint.affected_blocks(i).len(), 1);
        }
    }

    #[test]
    fn construction_validates() {
        let uncovered = SeparableProblem::new(
            3,
            vec![SubFunction::from_fn(IndexSet::range(0, 2).unwrap(), sum_sq())],
            FeasibleRegion::Unbounded,
            vec![0.0; 3],
        );
        assert!(matches!(uncovered, Err(Error::InvalidProblem(_))));
        let infeasible = SeparableProblem::new(
            2,
            vec![SubFunction::from_fn(IndexSet::range(0, 2).unwrap(), sum_sq())],
            FeasibleRegion::uniform_box(2, 0.0, 1.0).unwrap(),
            vec![2.0, 0.0],
        );
        assert!(matches!(infeasible, Err(Error::InvalidProblem(_))));
        assert!(IndexSet::new(vec![1, 1]).is_err());
        assert!(IndexSet::new(vec![2, 1]).is_err());
        assert!(IndexSet::new(vec![]).is_err());
    }

    #[test]
    fn custom_projection_spot_check() {
        // Euclidean ball of radius 1.
        let ball = FeasibleRegion::custom(|v: &[f64]| {
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r <= 1.0 {
                v.to_vec()
            } else {
                v.iter().map(|x| x / r).collect()
            }
        });
        let samples: Vec<Vec<f64>> = (0..50)
            .map(|k| vec![(k as f64 * 0.37).sin() * 3.0, (k as f64 * 0.91).cos() * 2.0])
            .collect();
        ball.check_projection(&samples, 1e-12).unwrap();
        // Scaling by 2 is idempotent only at 0 and expands distances.
        let bad = FeasibleRegion::custom(|v: &[f64]| v.iter().map(|x| 2.0 * x).collect());
        assert!(bad.check_projection(&samples, 1e-12).is_err());
    }

    fn box_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(0.0f64..4.0, n),
                prop::collection::vec(-20.0f64..20.0, n),
            )
                .prop_map(|(lo, width, v)| {
                    let hi = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
                    (lo, hi, v)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn box_projection_is_feasible_and_idempotent((lo, hi, v) in box_strategy()) {
            let r = FeasibleRegion::boxed(lo, hi).unwrap();
            let p = r.project(&v);
            prop_assert!(r.contains(&p, 0.0));
            prop_assert_eq!(r.project(&p), p);
        }

        #[test]
        fn box_projection_is_nonexpansive(
            (lo, hi, u) in box_strategy(),
            shift in prop::collection::vec(-10.0f64..10.0, 6),
        ) {
            let v: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let r = FeasibleRegion::boxed(lo, hi).unwrap();
            prop_assert!(norm2_diff(&r.project(&u), &r.project(&v)) <= norm2_diff(&u, &v) + 1e-12);
        }

        #[test]
        fn coverage_sums_to_block_sizes(blocks in prop::collection::vec((0usize..8, 1usize..4), 1..6)) {
            let n = blocks.iter().map(|(s, l)| s + l).max().unwrap();
            let mut subs: Vec<SubFunction> = blocks
                .iter()
                .map(|&(s, l)| SubFunction::from_fn(IndexSet::range(s, l).unwrap(), |y: &[f64]| y[0]))
                .collect();
            // one block over everything guarantees coverage
            subs.push(SubFunction::from_fn(IndexSet::range(0, n).unwrap(), |y: &[f64]| y[0]));
            let p = SeparableProblem::new(n, subs, FeasibleRegion::Unbounded, vec![0.0; n]).unwrap();
            let total: usize = p.coverage_counts().iter().sum();
            let sizes: usize = p.subs().iter().map(|s| s.block().len()).sum();
            prop_assert_eq!(total, sizes);
        }
    }
}
