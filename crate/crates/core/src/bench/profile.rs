//! Data profiles and performance profiles over run records.

use std::collections::BTreeMap;
use std::io::Write;

use super::records::RunRecord;
use crate::error::{Error, Result};

/// Accuracy levels reported by default.
pub const EPS_LEVELS: [f64; 2] = [1e-2, 1e-4];

/// Fraction of problems solved against an increasing abscissa.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCurve {
    pub solver: String,
    pub grid: Vec<f64>,
    pub fraction: Vec<f64>,
}

impl ProfileCurve {
    pub fn at(&self, x: f64) -> f64 {
        self.grid
            .iter()
            .zip(&self.fraction)
            .take_while(|(g, _)| **g <= x)
            .last()
            .map_or(0.0, |(_, f)| *f)
    }

    pub fn last(&self) -> f64 {
        self.fraction.last().copied().unwrap_or(0.0)
    }
}

/// Cost measure for performance profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Sub-function evaluations until the run first counts as solved.
    SubEvalsToSolved,
    /// Total wall time of runs that end solved.
    WallTime,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sub_evals_to_solved" | "evals" => Ok(Self::SubEvalsToSolved),
            "wall_time" | "time" => Ok(Self::WallTime),
            other => Err(Error::Usage(format!("unknown profile metric {other:?}"))),
        }
    }
}

/// `f0 - fs >= (1 - eps) (f0 - fbest)`.
pub fn solved(f0: f64, fs: f64, fbest: f64, eps: f64) -> bool {
    f0 - fs >= (1.0 - eps) * (f0 - fbest)
}

/// `0, 1, ..., max` budget groups.
pub fn kappa_grid(max: usize) -> Vec<f64> {
    (0..=max).map(|k| k as f64).collect()
}

/// Records of one problem, indexed by solver.
struct ProblemRuns<'a> {
    fbest: f64,
    f0: f64,
    runs: BTreeMap<&'a str, &'a RunRecord>,
}

struct Table<'a> {
    solvers: Vec<&'a str>,
    problems: Vec<ProblemRuns<'a>>,
}

fn tabulate(records: &[RunRecord]) -> Result<Table<'_>> {
    let mut solvers: Vec<&str> = Vec::new();
    let mut by_problem: BTreeMap<&str, BTreeMap<&str, &RunRecord>> = BTreeMap::new();
    for r in records {
        if !solvers.contains(&r.solver.as_str()) {
            solvers.push(&r.solver);
        }
        if by_problem
            .entry(&r.problem)
            .or_default()
            .insert(&r.solver, r)
            .is_some()
        {
            return Err(Error::Usage(format!(
                "duplicate record for {} / {}",
                r.problem, r.solver
            )));
        }
    }
    let mut problems = Vec::new();
    for (name, runs) in by_problem {
        if runs.len() != solvers.len() {
            return Err(Error::Usage(format!(
                "problem {name} lacks records for some solvers"
            )));
        }
        let f0 = runs
            .values()
            .map(|r| r.f0)
            .find(|v| v.is_finite())
            .unwrap_or(f64::NAN);
        let fbest = runs
            .values()
            .map(|r| r.best_f())
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, f64::min);
        if !(fbest < f0) {
            log::info!("problem {name} excluded from profiles: no solver improved on f0");
            continue;
        }
        problems.push(ProblemRuns { fbest, f0, runs });
    }
    Ok(Table { solvers, problems })
}

fn evals_to_solve(r: &RunRecord, f0: f64, fbest: f64, eps: f64) -> Option<u64> {
    r.history
        .iter()
        .find(|h| solved(f0, h.best_f, fbest, eps))
        .map(|h| h.evals)
}

/// Fraction of problems solved within `kappa` budget groups of `m (n + 1)`
/// evaluations, for each `kappa` in `grid`.
pub fn data_profile(records: &[RunRecord], eps: f64, grid: &[f64]) -> Result<Vec<ProfileCurve>> {
    check_eps(eps)?;
    let t = tabulate(records)?;
    let np = t.problems.len() as f64;
    Ok(t.solvers
        .iter()
        .map(|&s| {
            let needed: Vec<Option<f64>> = t
                .problems
                .iter()
                .map(|p| {
                    let r = p.runs[s];
                    evals_to_solve(r, p.f0, p.fbest, eps).map(|e| e as f64 / r.group_size())
                })
                .collect();
            let fraction = grid
                .iter()
                .map(|&k| {
                    if np == 0.0 {
                        0.0
                    } else {
                        needed.iter().filter(|c| c.is_some_and(|c| c <= k)).count() as f64 / np
                    }
                })
                .collect();
            ProfileCurve {
                solver: s.to_string(),
                grid: grid.to_vec(),
                fraction,
            }
        })
        .collect())
}

/// Ratio-to-best curves; unsolved runs have ratio `+inf`. The grid holds
/// every finite ratio that occurs.
pub fn performance_profile(records: &[RunRecord], metric: Metric, eps: f64) -> Result<Vec<ProfileCurve>> {
    check_eps(eps)?;
    let t = tabulate(records)?;
    let cost = |r: &RunRecord, p: &ProblemRuns| -> f64 {
        match metric {
            Metric::SubEvalsToSolved => {
                evals_to_solve(r, p.f0, p.fbest, eps).map_or(f64::INFINITY, |e| e as f64)
            }
            Metric::WallTime => match (r.wall_time, solved(p.f0, r.best_f(), p.fbest, eps)) {
                (Some(w), true) => w,
                _ => f64::INFINITY,
            },
        }
    };
    let ratios: Vec<Vec<f64>> = t
        .problems
        .iter()
        .map(|p| {
            let costs: Vec<f64> = t.solvers.iter().map(|s| cost(p.runs[s], p)).collect();
            let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
            costs
                .iter()
                .map(|&c| {
                    if !c.is_finite() {
                        f64::INFINITY
                    } else if best > 0.0 {
                        c / best
                    } else if c == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();
    let mut grid: Vec<f64> = std::iter::once(1.0)
        .chain(ratios.iter().flatten().copied().filter(|r| r.is_finite()))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let np = t.problems.len() as f64;
    Ok(t.solvers
        .iter()
        .enumerate()
        .map(|(k, s)| ProfileCurve {
            solver: s.to_string(),
            fraction: grid
                .iter()
                .map(|&g| {
                    if np == 0.0 {
                        0.0
                    } else {
                        ratios.iter().filter(|r| r[k] <= g).count() as f64 / np
                    }
                })
                .collect(),
            grid: grid.clone(),
        })
        .collect())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("eps must lie in (0, 1), got {eps}")))
    }
}

/// Writes curves sharing one grid as `grid,<solver>...` CSV.
pub fn write_profile<W: Write>(curves: &[ProfileCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["grid".to_string()];
    header.extend(curves.iter().map(|c| c.solver.clone()));
    w.write_record(&header)?;
    if let Some(first) = curves.first() {
        for (i, g) in first.grid.iter().enumerate() {
            let mut row = vec![g.to_string()];
            row.extend(curves.iter().map(|c| c.fraction[i].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Writes a step-line chart of `curves` as a standalone SVG document.
/// With `log_x` the abscissa is drawn on a log2 scale.
pub fn write_svg<W: Write>(curves: &[ProfileCurve], title: &str, x_label: &str, log_x: bool, mut out: W) -> Result<()> {
    let tx = |x: f64| if log_x { x.max(1.0).log2() } else { x };
    let xs = curves.iter().flat_map(|c| c.grid.iter().map(|&g| tx(g)));
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (0.0, 1.0) };
    let pw = SVG_W - 2.0 * MARGIN;
    let ph = SVG_H - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (tx(x) - lo) / (hi - lo) * pw;
    let py = |y: f64| SVG_H - MARGIN - y * ph;
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="12">"#)?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, SVG_W / 2.0, escape(title))?;
    writeln!(
        out,
        r#"<path d="M{MARGIN},{MARGIN} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = SVG_H - MARGIN,
        r = SVG_W - MARGIN
    )?;
    for t in 0..=4 {
        let y = t as f64 / 4.0;
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y}</text>"#, MARGIN - 6.0, py(y) + 4.0)?;
    }
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let (x, shown) = if log_x { (v.exp2(), v.exp2()) } else { (v, v) };
        writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.3}</text>"#, px(x), SVG_H - MARGIN + 16.0, shown)?;
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, SVG_W / 2.0, SVG_H - 10.0, escape(x_label))?;
    for (k, c) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (i, (&g, &f)) in c.grid.iter().zip(&c.fraction).enumerate() {
            if i == 0 {
                d.push_str(&format!("M{:.2},{:.2}", px(g), py(f)));
            } else {
                d.push_str(&format!(" H{:.2} V{:.2}", px(g), py(f)));
            }
        }
        if let Some(&last) = c.grid.last() {
            if px(last) < SVG_W - MARGIN {
                d.push_str(&format!(" H{:.2}", SVG_W - MARGIN));
            }
        }
        writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2"/>"#)?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}" text-anchor="end">{}</text>"#,
            SVG_W - MARGIN - 6.0,
            SVG_H - MARGIN - 10.0 - 16.0 * (curves.len() - 1 - k) as f64,
            escape(&c.solver)
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{HistoryPoint, Termination};
    use proptest::prelude::*;

    fn rec(problem: &str, solver: &str, n: usize, m: usize, f0: f64, hist: &[(u64, f64)]) -> RunRecord {
        RunRecord {
            problem: problem.into(),
            solver: solver.into(),
            n,
            m,
            f0,
            final_f: hist.last().map_or(f0, |h| h.1),
            evals: hist.last().map_or(0, |h| h.0),
            history: hist
                .iter()
                .map(|&(evals, best_f)| HistoryPoint { evals, best_f })
                .collect(),
            wall_time: None,
            termination: Termination::StepTol,
        }
    }

    #[test]
    fn solved_examples() {
        assert!(!solved(10.0, 1.0, 0.5, 0.01));
        assert!(solved(10.0, 0.5, 0.5, 0.01));
        assert!(solved(3.0, -7.0, -7.0, 1e-4));
        assert!(!solved(10.0, 10.0, 0.5, 0.01));
    }

    #[test]
    fn data_profile_single_problem() {
        // m = 2, n = 3: one group is 8 evaluations; solved at 24 = 3 groups
        let r = rec("p", "a", 3, 2, 10.0, &[(2, 10.0), (16, 5.0), (24, 0.0)]);
        let grid = kappa_grid(5);
        let c = data_profile(&[r], 1e-2, &grid).unwrap();
        assert_eq!(c[0].fraction, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn data_profile_two_problems() {
        // n = 1, m = 1: one group is 2 evaluations
        let recs = vec![
            rec("p", "a", 1, 1, 4.0, &[(1, 4.0), (2, 0.0)]),
            rec("q", "a", 1, 1, 4.0, &[(1, 4.0), (10, 1.0)]),
        ];
        let c = data_profile(&recs, 1e-2, &[0.0, 0.5, 1.0, 4.9, 5.0, 6.0]).unwrap();
        assert_eq!(c[0].fraction, vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn never_solving_solver_is_zero() {
        let recs = vec![
            rec("p", "a", 1, 1, 4.0, &[(1, 4.0), (2, 0.0)]),
            rec("p", "b", 1, 1, 4.0, &[(1, 4.0)]),
        ];
        let d = data_profile(&recs, 1e-2, &kappa_grid(3)).unwrap();
        assert!(d[1].fraction.iter().all(|&f| f == 0.0));
        let p = performance_profile(&recs, Metric::SubEvalsToSolved, 1e-2).unwrap();
        assert!(p[1].fraction.iter().all(|&f| f == 0.0));
        assert_eq!(p[0].fraction[0], 1.0);
    }

    #[test]
    fn performance_profile_two_solvers() {
        let recs = vec![
            rec("p", "a", 1, 1, 4.0, &[(1, 4.0), (100, 0.0)]),
            rec("p", "b", 1, 1, 4.0, &[(1, 4.0), (200, 0.0)]),
        ];
        let c = performance_profile(&recs, Metric::SubEvalsToSolved, 1e-2).unwrap();
        assert_eq!(c[0].grid, vec![1.0, 2.0]);
        assert_eq!(c[0].fraction, vec![1.0, 1.0]);
        assert_eq!(c[1].fraction, vec![0.0, 1.0]);
    }

    #[test]
    fn wall_time_profile_uses_solved_runs_only() {
        let mut a = rec("p", "a", 1, 1, 4.0, &[(1, 4.0), (100, 0.0)]);
        let mut b = rec("p", "b", 1, 1, 4.0, &[(1, 4.0), (200, 3.0)]);
        a.wall_time = Some(2.0);
        b.wall_time = Some(1.0);
        let c = performance_profile(&[a, b], Metric::WallTime, 1e-2).unwrap();
        assert_eq!(c[0].fraction, vec![1.0]);
        assert_eq!(c[1].fraction, vec![0.0]);
    }

    #[test]
    fn unimproved_problems_are_excluded() {
        let recs = vec![
            rec("p", "a", 1, 1, 4.0, &[(1, 4.0)]),
            rec("q", "a", 1, 1, 4.0, &[(1, 4.0), (2, 1.0)]),
        ];
        let c = data_profile(&recs, 1e-2, &[1.0]).unwrap();
        assert_eq!(c[0].fraction, vec![1.0]);
    }

    #[test]
    fn missing_solver_records_are_rejected() {
        let recs = vec![
            rec("p", "a", 1, 1, 4.0, &[(1, 4.0), (2, 0.0)]),
            rec("q", "b", 1, 1, 4.0, &[(1, 4.0), (2, 0.0)]),
        ];
        assert!(data_profile(&recs, 1e-2, &[1.0]).is_err());
        assert!(data_profile(&recs[..1], 1.5, &[1.0]).is_err());
    }

    #[test]
    fn profile_csv_layout() {
        let recs = vec![rec("p", "a", 1, 1, 4.0, &[(1, 4.0), (2, 0.0)])];
        let c = data_profile(&recs, 1e-2, &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_profile(&c, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "grid,a\n0,0\n1,1\n");
    }

    #[test]
    fn svg_is_self_contained() {
        let recs = vec![
            rec("p", "a<b", 1, 1, 4.0, &[(1, 4.0), (2, 0.0)]),
            rec("p", "c", 1, 1, 4.0, &[(1, 4.0), (8, 0.0)]),
        ];
        let c = performance_profile(&recs, Metric::SubEvalsToSolved, 1e-2).unwrap();
        let mut buf = Vec::new();
        write_svg(&c, "perf", "ratio", true, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<path").count(), 3);
        assert!(s.contains("a&lt;b") && !s.contains("href"));
    }

    proptest! {
        #[test]
        fn curves_are_monotone_and_bounded(
            hists in prop::collection::vec(prop::collection::vec((1u64..50, 0.0f64..10.0), 1..6), 2..12),
            eps in prop::sample::select(EPS_LEVELS.to_vec()),
        ) {
            let solvers = ["a", "b"];
            let mut recs = Vec::new();
            for (k, h) in hists.iter().enumerate() {
                let mut evals = 0;
                let mut best = 10.0f64;
                let mut pts = Vec::new();
                for &(de, f) in h {
                    evals += de;
                    best = best.min(f);
                    pts.push((evals, best));
                }
                recs.push(rec(&format!("p{}", k / 2), solvers[k % 2], 2, 2, 10.0, &pts));
            }
            if recs.len() % 2 == 1 {
                recs.pop();
            }
            for c in data_profile(&recs, eps, &kappa_grid(20)).unwrap()
                .into_iter()
                .chain(performance_profile(&recs, Metric::SubEvalsToSolved, eps).unwrap())
            {
                prop_assert!(c.fraction.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(c.fraction.iter().all(|&f| (0.0..=1.0).contains(&f)));
            }
        }

        #[test]
        fn lone_solver_reaches_one_at_its_budget(
            h in prop::collection::vec((1u64..50, 0.0f64..10.0), 2..8),
            eps in prop::sample::select(EPS_LEVELS.to_vec()),
        ) {
            let mut evals = 0;
            let mut best = 10.0f64;
            let pts: Vec<(u64, f64)> = h.iter().map(|&(de, f)| { evals += de; best = best.min(f); (evals, best) }).collect();
            let r = rec("p", "a", 3, 1, 10.5, &pts);
            let k = evals as f64 / r.group_size();
            let c = data_profile(&[r], eps, &[k]).unwrap();
            prop_assert_eq!(c[0].fraction[0], 1.0);
        }
    }
}
