//! Small-dimensional base functions from the usual unconstrained test sets,
//! reimplemented from their published formulas.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::{GradientFn, Oracle};

/// A fixed-dimension test function used as a building block of generated
/// problems.
#[derive(Clone)]
pub struct BaseFunction {
    pub name: String,
    pub dim: usize,
    pub oracle: Oracle,
    /// Analytic gradient, used only to verify solutions.
    pub gradient: GradientFn,
    pub known_fstar: Option<f64>,
    /// A point where `known_fstar` is attained, when it has a closed form.
    pub minimizer: Option<Vec<f64>>,
    pub default_start: Vec<f64>,
    /// Uniform box `[lo, hi]` commonly paired with the function.
    pub default_box: Option<(f64, f64)>,
}

impl BaseFunction {
    fn new<F, G>(name: &str, dim: usize, f: F, g: G, start: Vec<f64>) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        debug_assert_eq!(start.len(), dim);
        Self {
            name: name.to_string(),
            dim,
            oracle: Arc::new(f),
            gradient: Arc::new(g),
            known_fstar: None,
            minimizer: None,
            default_start: start,
            default_box: None,
        }
    }

    fn optimum(mut self, fstar: f64, minimizer: Option<Vec<f64>>) -> Self {
        self.known_fstar = Some(fstar);
        self.minimizer = minimizer;
        self
    }

    fn boxed(mut self, lo: f64, hi: f64) -> Self {
        self.default_box = Some((lo, hi));
        self
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        (self.oracle)(y)
    }

    pub fn grad(&self, y: &[f64]) -> Vec<f64> {
        (self.gradient)(y)
    }
}

impl fmt::Debug for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("known_fstar", &self.known_fstar)
            .finish_non_exhaustive()
    }
}

/// Every base function at its default dimension.
pub fn base_library() -> Vec<BaseFunction> {
    vec![
        rosenbr(),
        beale(),
        woods(),
        arwhead(),
        engval(),
        freuroth(),
        tridia(3),
        broydn3d(3),
        morebv(3),
        dixmaana(1),
        squad_a(),
        squad_b(),
        squad_c(),
    ]
}

/// Looks a base function up by its (case-insensitive) name.
pub fn base_by_name(name: &str) -> Result<BaseFunction> {
    base_library()
        .into_iter()
        .find(|b| b.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Usage(format!("unknown base function {name:?}")))
}

/// `100 (x2 - x1²)² + (1 - x1)²`.
pub fn rosenbr() -> BaseFunction {
    BaseFunction::new(
        "ROSENBR",
        2,
        |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
        |x| {
            let a = x[1] - x[0] * x[0];
            vec![-400.0 * x[0] * a - 2.0 * (1.0 - x[0]), 200.0 * a]
        },
        vec![-1.2, 1.0],
    )
    .optimum(0.0, Some(vec![1.0, 1.0]))
}

pub fn beale() -> BaseFunction {
    BaseFunction::new(
        "BEALE",
        2,
        |x| {
            let (t1, t2, t3) = beale_terms(x);
            t1 * t1 + t2 * t2 + t3 * t3
        },
        |x| {
            let (t1, t2, t3) = beale_terms(x);
            let (a, b) = (x[0], x[1]);
            vec![
                2.0 * t1 * (b - 1.0) + 2.0 * t2 * (b * b - 1.0) + 2.0 * t3 * (b.powi(3) - 1.0),
                2.0 * t1 * a + 4.0 * t2 * a * b + 6.0 * t3 * a * b * b,
            ]
        },
        vec![1.0, 1.0],
    )
    .optimum(0.0, Some(vec![3.0, 0.5]))
    .boxed(-4.5, 4.5)
}

fn beale_terms(x: &[f64]) -> (f64, f64, f64) {
    let (a, b) = (x[0], x[1]);
    (
        1.5 - a + a * b,
        2.25 - a + a * b * b,
        2.625 - a + a * b.powi(3),
    )
}

pub fn woods() -> BaseFunction {
    BaseFunction::new(
        "WOODS",
        4,
        |x| {
            100.0 * (x[1] - x[0] * x[0]).powi(2)
                + (1.0 - x[0]).powi(2)
                + 90.0 * (x[3] - x[2] * x[2]).powi(2)
                + (1.0 - x[2]).powi(2)
                + 10.1 * ((x[1] - 1.0).powi(2) + (x[3] - 1.0).powi(2))
                + 19.8 * (x[1] - 1.0) * (x[3] - 1.0)
        },
        |x| {
            let a = x[1] - x[0] * x[0];
            let c = x[3] - x[2] * x[2];
            vec![
                -400.0 * x[0] * a - 2.0 * (1.0 - x[0]),
                200.0 * a + 20.2 * (x[1] - 1.0) + 19.8 * (x[3] - 1.0),
                -360.0 * x[2] * c - 2.0 * (1.0 - x[2]),
                180.0 * c + 20.2 * (x[3] - 1.0) + 19.8 * (x[1] - 1.0),
            ]
        },
        vec![-3.0, -1.0, -3.0, -1.0],
    )
    .optimum(0.0, Some(vec![1.0; 4]))
}

/// `(a² + b²)² - 4 b + 3`, where `a` is the variable shared by all terms.
pub fn arwhead() -> BaseFunction {
    BaseFunction::new(
        "ARWHEAD",
        2,
        |x| {
            let q = x[0] * x[0] + x[1] * x[1];
            q * q - 4.0 * x[1] + 3.0
        },
        |x| {
            let q = x[0] * x[0] + x[1] * x[1];
            vec![4.0 * q * x[0], 4.0 * q * x[1] - 4.0]
        },
        vec![1.0, 1.0],
    )
    .optimum(0.0, Some(vec![0.0, 1.0]))
}

/// `(u² + v²)² - 4 u + 3`.
pub fn engval() -> BaseFunction {
    BaseFunction::new(
        "ENGVAL",
        2,
        |x| {
            let q = x[0] * x[0] + x[1] * x[1];
            q * q - 4.0 * x[0] + 3.0
        },
        |x| {
            let q = x[0] * x[0] + x[1] * x[1];
            vec![4.0 * q * x[0] - 4.0, 4.0 * q * x[1]]
        },
        vec![2.0, 2.0],
    )
    .optimum(0.0, Some(vec![1.0, 0.0]))
}

pub fn freuroth() -> BaseFunction {
    BaseFunction::new(
        "FREUROTH",
        2,
        |x| {
            let (r1, r2) = freuroth_terms(x);
            r1 * r1 + r2 * r2
        },
        |x| {
            let (r1, r2) = freuroth_terms(x);
            let v = x[1];
            let d1 = 10.0 * v - 3.0 * v * v - 2.0;
            let d2 = 3.0 * v * v + 2.0 * v - 14.0;
            vec![2.0 * (r1 + r2), 2.0 * (r1 * d1 + r2 * d2)]
        },
        vec![0.5, -2.0],
    )
    .optimum(0.0, Some(vec![5.0, 4.0]))
}

fn freuroth_terms(x: &[f64]) -> (f64, f64) {
    let (u, v) = (x[0], x[1]);
    (
        -13.0 + u + ((5.0 - v) * v - 2.0) * v,
        -29.0 + u + ((v + 1.0) * v - 14.0) * v,
    )
}

/// `(x1 - 1)² + Σ_{i≥2} i (2 x_i - x_{i-1})²` on `d` variables.
pub fn tridia(d: usize) -> BaseFunction {
    assert!(d >= 1);
    let minimizer = (0..d).map(|i| 0.5f64.powi(i as i32)).collect();
    BaseFunction::new(
        "TRIDIA",
        d,
        |x| {
            let mut f = (x[0] - 1.0).powi(2);
            for i in 1..x.len() {
                f += (i + 1) as f64 * (2.0 * x[i] - x[i - 1]).powi(2);
            }
            f
        },
        |x| {
            let mut g = vec![0.0; x.len()];
            g[0] = 2.0 * (x[0] - 1.0);
            for i in 1..x.len() {
                let e = (i + 1) as f64 * (2.0 * x[i] - x[i - 1]);
                g[i] += 4.0 * e;
                g[i - 1] -= 2.0 * e;
            }
            g
        },
        vec![1.0; d],
    )
    .optimum(0.0, Some(minimizer))
}

/// Residual `r_i` of the Broyden tridiagonal system and its partial
/// derivatives with respect to `(x_{i-1}, x_i, x_{i+1})`.
pub fn broydn3d_residual(prev: f64, xi: f64, next: f64) -> (f64, [f64; 3]) {
    (
        (3.0 - 2.0 * xi) * xi - prev - 2.0 * next + 1.0,
        [-1.0, 3.0 - 4.0 * xi, -2.0],
    )
}

/// Residual of the discretized boundary value problem with mesh `h` at
/// node `t`, and its partial derivatives.
pub fn morebv_residual(prev: f64, xi: f64, next: f64, h: f64, t: f64) -> (f64, [f64; 3]) {
    let u = xi + t + 1.0;
    (
        2.0 * xi - prev - next + 0.5 * h * h * u.powi(3),
        [-1.0, 2.0 + 1.5 * h * h * u * u, -1.0],
    )
}

fn tridiagonal_sum_of_squares<R>(x: &[f64], residual: R) -> (f64, Vec<f64>)
where
    R: Fn(usize, f64, f64, f64) -> (f64, [f64; 3]),
{
    let d = x.len();
    let mut f = 0.0;
    let mut g = vec![0.0; d];
    for i in 0..d {
        let prev = if i > 0 { x[i - 1] } else { 0.0 };
        let next = if i + 1 < d { x[i + 1] } else { 0.0 };
        let (r, dr) = residual(i, prev, x[i], next);
        f += r * r;
        if i > 0 {
            g[i - 1] += 2.0 * r * dr[0];
        }
        g[i] += 2.0 * r * dr[1];
        if i + 1 < d {
            g[i + 1] += 2.0 * r * dr[2];
        }
    }
    (f, g)
}

/// `Σ_i r_i²` for the Broyden tridiagonal residuals on `d` variables.
pub fn broydn3d(d: usize) -> BaseFunction {
    assert!(d >= 1);
    let res = |_: usize, a, b, c| broydn3d_residual(a, b, c);
    BaseFunction::new(
        "BROYDN3D",
        d,
        move |x| tridiagonal_sum_of_squares(x, res).0,
        move |x| tridiagonal_sum_of_squares(x, res).1,
        vec![-1.0; d],
    )
    .optimum(0.0, None)
}

/// `Σ_i r_i²` for the boundary value residuals on `d` variables.
pub fn morebv(d: usize) -> BaseFunction {
    assert!(d >= 1);
    let h = 1.0 / (d + 1) as f64;
    let res = move |i: usize, a, b, c| morebv_residual(a, b, c, h, (i + 1) as f64 * h);
    let start = (1..=d)
        .map(|i| {
            let t = i as f64 * h;
            t * (t - 1.0)
        })
        .collect();
    BaseFunction::new(
        "MOREBV",
        d,
        move |x| tridiagonal_sum_of_squares(x, res).0,
        move |x| tridiagonal_sum_of_squares(x, res).1,
        start,
    )
    .optimum(0.0, None)
}

/// DIXMAANA on `3k` variables (`alpha = 1`, `beta = 0`, `gamma = delta = 0.125`,
/// all index weights to the power 0).
pub fn dixmaana(k: usize) -> BaseFunction {
    assert!(k >= 1);
    let d = 3 * k;
    BaseFunction::new(
        "DIXMAANA",
        d,
        move |x| (0..d).map(|i| dixmaana_term(x, i, k)).sum::<f64>() + 1.0,
        move |x| {
            let mut g = vec![0.0; d];
            for i in 0..d {
                g[i] += 2.0 * x[i];
                if i < 2 * k {
                    g[i] += 0.25 * x[i] * x[i + k].powi(4);
                    g[i + k] += 0.5 * x[i] * x[i] * x[i + k].powi(3);
                }
                if i < k {
                    g[i] += 0.125 * x[i + 2 * k];
                    g[i + 2 * k] += 0.125 * x[i];
                }
            }
            g
        },
        vec![2.0; d],
    )
    .optimum(1.0, Some(vec![0.0; d]))
}

/// Terms of DIXMAANA attached to coordinate `i`.
pub(crate) fn dixmaana_term(x: &[f64], i: usize, k: usize) -> f64 {
    let mut t = x[i] * x[i];
    if i < 2 * k {
        t += 0.125 * x[i] * x[i] * x[i + k].powi(4);
    }
    if i < k {
        t += 0.125 * x[i] * x[i + 2 * k];
    }
    t
}

fn weighted_quadratic(name: &str, center: [f64; 3], weight: [f64; 3]) -> BaseFunction {
    BaseFunction::new(
        name,
        3,
        move |x| {
            (0..3)
                .map(|k| weight[k] * (x[k] - center[k]).powi(2))
                .sum()
        },
        move |x| (0..3).map(|k| 2.0 * weight[k] * (x[k] - center[k])).collect(),
        vec![0.0; 3],
    )
    .optimum(0.0, Some(center.to_vec()))
}

/// Separable quadratics with different centers; sharing their first
/// coordinates makes the copies disagree on the shared variables.
pub fn squad_a() -> BaseFunction {
    weighted_quadratic("SQUAD_A", [1.0, 2.0, -1.0], [1.0, 2.0, 3.0])
}

pub fn squad_b() -> BaseFunction {
    weighted_quadratic("SQUAD_B", [-1.0, 0.5, 2.0], [2.0, 1.0, 1.0])
}

pub fn squad_c() -> BaseFunction {
    weighted_quadratic("SQUAD_C", [0.5, -2.0, 1.0], [1.0, 1.0, 2.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(b: &BaseFunction, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let h = 1e-6 * x[i].abs().max(1.0);
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (b.value(&p) - b.value(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut bases = base_library();
        bases.extend([tridia(6), broydn3d(5), morebv(7), dixmaana(3)]);
        for b in &bases {
            for _ in 0..20 {
                let x: Vec<f64> = (0..b.dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let g = b.grad(&x);
                let fd = fd_grad(b, &x);
                for (a, e) in g.iter().zip(&fd) {
                    let scale = a.abs().max(e.abs()).max(1.0);
                    assert!((a - e).abs() <= 1e-5 * scale, "{}: {g:?} vs {fd:?}", b.name);
                }
            }
        }
    }

    #[test]
    fn known_minimizers_attain_fstar() {
        for b in base_library() {
            if let (Some(fs), Some(xs)) = (b.known_fstar, &b.minimizer) {
                assert!((b.value(xs) - fs).abs() <= 1e-10, "{}", b.name);
                assert!(b.grad(xs).iter().all(|g| g.abs() <= 1e-10), "{}", b.name);
            }
        }
    }

    #[test]
    fn spec_values() {
        assert_eq!(beale().value(&[3.0, 0.5]), 0.0);
        assert_eq!(rosenbr().value(&[1.0, 1.0]), 0.0);
        assert_eq!(woods().value(&[1.0; 4]), 0.0);
        approx::assert_relative_eq!(rosenbr().value(&[-1.2, 1.0]), 24.2, max_relative = 1e-14);
        assert_eq!(tridia(4).minimizer.unwrap(), vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn broydn3d_has_a_root() {
        // Newton on the tridiagonal system from the standard start
        let d = 6;
        let mut x = vec![-1.0; d];
        for _ in 0..50 {
            let mut jac = vec![vec![0.0; d]; d];
            let mut r = vec![0.0; d];
            for i in 0..d {
                let prev = if i > 0 { x[i - 1] } else { 0.0 };
                let next = if i + 1 < d { x[i + 1] } else { 0.0 };
                let (ri, dr) = broydn3d_residual(prev, x[i], next);
                r[i] = ri;
                if i > 0 {
                    jac[i][i - 1] = dr[0];
                }
                jac[i][i] = dr[1];
                if i + 1 < d {
                    jac[i][i + 1] = dr[2];
                }
            }
            let step = solve_dense(jac, r);
            for (xi, s) in x.iter_mut().zip(step) {
                *xi -= s;
            }
        }
        assert!(broydn3d(d).value(&x) <= 1e-20);
    }

    fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                let (top, bottom) = a.split_at_mut(r);
                for (t, s) in bottom[0][c..n].iter_mut().zip(&top[c][c..n]) {
                    *t -= f * s;
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(base_by_name("rosenbr").unwrap().dim, 2);
        assert!(matches!(base_by_name("nope"), Err(Error::Usage(_))));
    }
}
