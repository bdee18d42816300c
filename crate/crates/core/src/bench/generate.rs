//! Partially separable problems built from base functions.

use std::sync::Arc;

use super::library::{broydn3d_residual, dixmaana_term, morebv_residual, BaseFunction};
use crate::error::{Error, Result};
use crate::problem::{FeasibleRegion, IndexSet, SeparableProblem, SubFunction};

/// A generated problem with whatever is known about its optimum.
#[derive(Clone, Debug)]
pub struct Generated {
    pub problem: SeparableProblem,
    pub known_fstar: Option<f64>,
    pub minimizer: Option<Vec<f64>>,
}

impl Generated {
    /// Restricts the problem to the box `[lo, hi]^n`, projecting the start.
    /// The known optimum is kept only if the minimizer lies in the box.
    pub fn with_box(self, lo: f64, hi: f64) -> Result<Self> {
        let p = self.problem;
        let n = p.dim();
        let region = FeasibleRegion::uniform_box(n, lo, hi)?;
        let x0 = region.project(p.x0());
        let keep = self
            .minimizer
            .as_ref()
            .is_some_and(|xs| region.contains(xs, 0.0));
        let problem = SeparableProblem::new(n, p.subs().to_vec(), region, x0)?
            .with_name(p.name())
            .with_eval_delay(p.eval_delay());
        Ok(Self {
            problem,
            known_fstar: self.known_fstar.filter(|_| keep),
            minimizer: self.minimizer.filter(|_| keep),
        })
    }

    pub fn with_start(self, x0: Vec<f64>) -> Result<Self> {
        Ok(Self {
            problem: self.problem.with_start(x0)?,
            ..self
        })
    }

    pub fn with_name(self, name: &str) -> Self {
        Self {
            problem: self.problem.with_name(name),
            ..self
        }
    }
}

fn base_sub(base: &BaseFunction, block: IndexSet) -> SubFunction {
    SubFunction::new(block, base.oracle.clone()).with_gradient(base.gradient.clone())
}

/// Copies of the bases on the given blocks; later copies overwrite the
/// start values of shared coordinates.
fn assemble(name: String, n: usize, parts: Vec<(&BaseFunction, IndexSet)>) -> Result<Generated> {
    let mut x0 = vec![0.0; n];
    let mut xs = vec![f64::NAN; n];
    let mut consistent = true;
    let mut fstar = Some(0.0);
    for (base, block) in &parts {
        for (&i, &v) in block.as_slice().iter().zip(&base.default_start) {
            x0[i] = v;
        }
        fstar = fstar.zip(base.known_fstar).map(|(a, b)| a + b);
        match &base.minimizer {
            Some(m) => {
                for (&i, &v) in block.as_slice().iter().zip(m) {
                    if xs[i].is_nan() {
                        xs[i] = v;
                    } else if xs[i] != v {
                        consistent = false;
                    }
                }
            }
            None => consistent = false,
        }
    }
    let subs = parts.iter().map(|(b, s)| base_sub(b, s.clone())).collect();
    let problem = SeparableProblem::new(n, subs, FeasibleRegion::Unbounded, x0)?.with_name(name);
    let minimizer = consistent.then_some(xs);
    Ok(Generated {
        problem,
        known_fstar: fstar.filter(|_| minimizer.is_some()),
        minimizer,
    })
}

/// `m` copies linked so that the last variable of each copy is the first
/// variable of the next one; `n = m (dim - 1) + 1`.
pub fn generate_chain(base: &BaseFunction, m: usize) -> Result<Generated> {
    if m == 0 {
        return Err(Error::Usage("chain needs at least one copy".into()));
    }
    if base.dim < 2 && m > 1 {
        return Err(Error::Usage(format!(
            "{} has dimension {}; chaining needs at least 2",
            base.name, base.dim
        )));
    }
    let step = base.dim.saturating_sub(1).max(1);
    let n = if m == 1 { base.dim } else { m * (base.dim - 1) + 1 };
    let parts = (0..m)
        .map(|j| Ok((base, IndexSet::range(j * step, base.dim)?)))
        .collect::<Result<_>>()?;
    assemble(format!("{}-chain-{m}", base.name), n, parts)
}

/// Copies sharing their first `s` variables; the rest are private, giving
/// `n = s + Σ_j (dim_j - s)`.
pub fn generate_shared_head(bases: &[BaseFunction], s: usize) -> Result<Generated> {
    if bases.is_empty() {
        return Err(Error::Usage("shared-head pattern needs at least one base".into()));
    }
    if s == 0 || bases.iter().any(|b| b.dim < s) {
        return Err(Error::Usage(format!(
            "shared count {s} must lie in 1..=min base dimension"
        )));
    }
    let mut next = s;
    let mut parts = Vec::with_capacity(bases.len());
    for b in bases {
        let mut idx: Vec<usize> = (0..s).collect();
        idx.extend(next..next + b.dim - s);
        next += b.dim - s;
        parts.push((b, IndexSet::new(idx)?));
    }
    let names: Vec<&str> = bases.iter().map(|b| b.name.as_str()).collect();
    assemble(format!("{}-head{s}", names.join("+")), next, parts)
}

/// `m` copies of `base` sharing exactly one variable (their first).
pub fn generate_shared_all(base: &BaseFunction, m: usize) -> Result<Generated> {
    if m == 0 {
        return Err(Error::Usage("shared-all pattern needs at least one copy".into()));
    }
    let bases = vec![base.clone(); m];
    generate_shared_head(&bases, 1).map(|g| g.with_name(&format!("{}-all-{m}", base.name)))
}

/// `m` copies of `base` on disjoint blocks.
pub fn generate_disjoint(base: &BaseFunction, m: usize) -> Result<Generated> {
    if m == 0 {
        return Err(Error::Usage("disjoint pattern needs at least one copy".into()));
    }
    let parts = (0..m)
        .map(|j| Ok((base, IndexSet::range(j * base.dim, base.dim)?)))
        .collect::<Result<_>>()?;
    assemble(format!("{}-disjoint-{m}", base.name), m * base.dim, parts)
}

type Residual = Arc<dyn Fn(usize, f64, f64, f64) -> (f64, [f64; 3]) + Send + Sync>;

/// One sub-function `r_i²` per row of a tridiagonal residual system.
fn tridiagonal_elements(n: usize, residual: Residual) -> Result<Vec<SubFunction>> {
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let block = IndexSet::new((lo..=hi).collect())?;
            let has_prev = i > 0;
            let unpack = move |y: &[f64]| {
                let mut k = 0;
                let prev = if has_prev {
                    k += 1;
                    y[0]
                } else {
                    0.0
                };
                let xi = y[k];
                let next = y.get(k + 1).copied().unwrap_or(0.0);
                (prev, xi, next)
            };
            let rf = residual.clone();
            let rg = residual.clone();
            Ok(SubFunction::from_fn(block, move |y: &[f64]| {
                let (a, b, c) = unpack(y);
                rf(i, a, b, c).0.powi(2)
            })
            .with_gradient(Arc::new(move |y: &[f64]| {
                let (a, b, c) = unpack(y);
                let (r, d) = rg(i, a, b, c);
                let mut g = Vec::with_capacity(y.len());
                if has_prev {
                    g.push(2.0 * r * d[0]);
                }
                g.push(2.0 * r * d[1]);
                if y.len() > g.len() {
                    g.push(2.0 * r * d[2]);
                }
                g
            })))
        })
        .collect()
}

/// Chained quadratic `(x_1 - 1)² + Σ_{i≥2} i (2 x_i - x_{i-1})²`, one
/// sub-function per term. The optimum is `x_i = 2^{1-i}` with value 0.
pub fn tridia_chain(n: usize) -> Result<Generated> {
    if n == 0 {
        return Err(Error::Usage("dimension must be positive".into()));
    }
    let mut subs = vec![SubFunction::from_fn(IndexSet::new(vec![0])?, |y: &[f64]| {
        (y[0] - 1.0).powi(2)
    })
    .with_gradient(Arc::new(|y: &[f64]| vec![2.0 * (y[0] - 1.0)]))];
    for i in 1..n {
        let w = (i + 1) as f64;
        subs.push(
            SubFunction::from_fn(IndexSet::new(vec![i - 1, i])?, move |y: &[f64]| {
                w * (2.0 * y[1] - y[0]).powi(2)
            })
            .with_gradient(Arc::new(move |y: &[f64]| {
                let e = 2.0 * w * (2.0 * y[1] - y[0]);
                vec![-e, 2.0 * e]
            })),
        );
    }
    let minimizer = (0..n).map(|i| 0.5f64.powi(i as i32)).collect();
    Ok(Generated {
        problem: SeparableProblem::new(n, subs, FeasibleRegion::Unbounded, vec![1.0; n])?
            .with_name(format!("TRIDIA-{n}")),
        known_fstar: Some(0.0),
        minimizer: Some(minimizer),
    })
}

/// Broyden tridiagonal least squares, one sub-function per residual.
pub fn broydn3d_elements(n: usize) -> Result<Generated> {
    if n == 0 {
        return Err(Error::Usage("dimension must be positive".into()));
    }
    let subs = tridiagonal_elements(n, Arc::new(|_, a, b, c| broydn3d_residual(a, b, c)))?;
    Ok(Generated {
        problem: SeparableProblem::new(n, subs, FeasibleRegion::Unbounded, vec![-1.0; n])?
            .with_name(format!("BROYDN3D-{n}")),
        known_fstar: Some(0.0),
        minimizer: None,
    })
}

/// Discretized boundary value problem, one sub-function per residual.
pub fn morebv_elements(n: usize) -> Result<Generated> {
    if n == 0 {
        return Err(Error::Usage("dimension must be positive".into()));
    }
    let h = 1.0 / (n + 1) as f64;
    let subs = tridiagonal_elements(
        n,
        Arc::new(move |i, a, b, c| morebv_residual(a, b, c, h, (i + 1) as f64 * h)),
    )?;
    let x0 = (1..=n)
        .map(|i| {
            let t = i as f64 * h;
            t * (t - 1.0)
        })
        .collect();
    Ok(Generated {
        problem: SeparableProblem::new(n, subs, FeasibleRegion::Unbounded, x0)?
            .with_name(format!("MOREBV-{n}")),
        known_fstar: Some(0.0),
        minimizer: None,
    })
}

/// Extended Woods function on `n = 4q` variables, six sub-functions per group:
/// `100 (x2 - x1²)²`, `(1 - x1)²`, `90 (x4 - x3²)²`, `(1 - x3)²`,
/// `10 (x2 + x4 - 2)²` and `0.1 (x2 - x4)²`.
pub fn woods_elements(n: usize) -> Result<Generated> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::Usage(format!("WOODS needs a positive multiple of 4, got {n}")));
    }
    let mut subs = Vec::with_capacity(n / 4 * 6);
    for g in 0..n / 4 {
        let b = 4 * g;
        subs.push(
            SubFunction::from_fn(IndexSet::new(vec![b, b + 1])?, |y: &[f64]| {
                100.0 * (y[1] - y[0] * y[0]).powi(2)
            })
            .with_gradient(Arc::new(|y: &[f64]| {
                let a = y[1] - y[0] * y[0];
                vec![-400.0 * y[0] * a, 200.0 * a]
            })),
        );
        subs.push(
            SubFunction::from_fn(IndexSet::new(vec![b])?, |y: &[f64]| (1.0 - y[0]).powi(2))
                .with_gradient(Arc::new(|y: &[f64]| vec![-2.0 * (1.0 - y[0])])),
        );
        subs.push(
            SubFunction::from_fn(IndexSet::new(vec![b + 2, b + 3])?, |y: &[f64]| {
                90.0 * (y[1] - y[0] * y[0]).powi(2)
            })
            .with_gradient(Arc::new(|y: &[f64]| {
                let a = y[1] - y[0] * y[0];
                vec![-360.0 * y[0] * a, 180.0 * a]
            })),
        );
        subs.push(
            SubFunction::from_fn(IndexSet::new(vec![b + 2])?, |y: &[f64]| (1.0 - y[0]).powi(2))
                .with_gradient(Arc::new(|y: &[f64]| vec![-2.0 * (1.0 - y[0])])),
        );
        subs.push(
            SubFunction::from_fn(IndexSet::new(vec![b + 1, b + 3])?, |y: &[f64]| {
                10.0 * (y[0] + y[1] - 2.0).powi(2)
            })
            .with_gradient(Arc::new(|y: &[f64]| {
                let e = 20.0 * (y[0] + y[1] - 2.0);
                vec![e, e]
            })),
        );
        subs.push(
            SubFunction::from_fn(IndexSet::new(vec![b + 1, b + 3])?, |y: &[f64]| {
                0.1 * (y[0] - y[1]).powi(2)
            })
            .with_gradient(Arc::new(|y: &[f64]| {
                let e = 0.2 * (y[0] - y[1]);
                vec![e, -e]
            })),
        );
    }
    let x0 = (0..n).map(|i| if i % 2 == 0 { -3.0 } else { -1.0 }).collect();
    Ok(Generated {
        problem: SeparableProblem::new(n, subs, FeasibleRegion::Unbounded, x0)?
            .with_name(format!("WOODS-{n}")),
        known_fstar: Some(0.0),
        minimizer: Some(vec![1.0; n]),
    })
}

/// DIXMAANA on `n = 3k` variables, one sub-function per coordinate holding
/// the terms that start at it. The constant 1 sits in the first one.
pub fn dixmaana_elements(n: usize) -> Result<Generated> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(Error::Usage(format!("DIXMAANA needs a positive multiple of 3, got {n}")));
    }
    let k = n / 3;
    let mut subs = Vec::with_capacity(n);
    for i in 0..n {
        let mut idx = vec![i];
        if i < 2 * k {
            idx.push(i + k);
        }
        if i < k {
            idx.push(i + 2 * k);
        }
        let block = IndexSet::new(idx)?;
        let offset = if i == 0 { 1.0 } else { 0.0 };
        // Local layout: y[0] = x_i, y[1] = x_{i+k}, y[2] = x_{i+2k}.
        let expand = move |y: &[f64]| {
            let mut x = vec![0.0; 3 * k];
            x[i] = y[0];
            if i < 2 * k {
                x[i + k] = y[1];
            }
            if i < k {
                x[i + 2 * k] = y[2];
            }
            x
        };
        subs.push(
            SubFunction::from_fn(block, move |y: &[f64]| {
                offset + dixmaana_term(&expand(y), i, k)
            })
            .with_gradient(Arc::new(move |y: &[f64]| {
                let mut g = vec![2.0 * y[0]];
                if i < 2 * k {
                    g[0] += 0.25 * y[0] * y[1].powi(4);
                    g.push(0.5 * y[0] * y[0] * y[1].powi(3));
                }
                if i < k {
                    g[0] += 0.125 * y[2];
                    g.push(0.125 * y[0]);
                }
                g
            })),
        );
    }
    Ok(Generated {
        problem: SeparableProblem::new(n, subs, FeasibleRegion::Unbounded, vec![2.0; n])?
            .with_name(format!("DIXMAANA-{n}")),
        known_fstar: Some(1.0),
        minimizer: Some(vec![0.0; n]),
    })
}
