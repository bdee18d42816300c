use pddf::baseline::{solve_observed, LsConfig, RefineMode};
use pddf::problem::{EvalCounter, FeasibleRegion, IndexSet, SeparableProblem, SubFunction};
use proptest::prelude::*;

fn rosen(y: &[f64]) -> f64 {
    100.0 * (y[1] - y[0] * y[0]).powi(2) + (1.0 - y[0]).powi(2)
}

/// Two-variable elements on random coordinate pairs plus a quadratic per coordinate.
fn problem(n: usize, pairs: &[(usize, usize)], boxed: bool, x0: &[f64]) -> SeparableProblem {
    let mut subs: Vec<SubFunction> = pairs
        .iter()
        .map(|&(a, b)| {
            let (lo, hi) = (a.min(b), a.max(b));
            SubFunction::from_fn(IndexSet::new(vec![lo, hi]).unwrap(), rosen)
        })
        .collect();
    for i in 0..n {
        let c = i as f64 * 0.25;
        subs.push(SubFunction::from_fn(IndexSet::new(vec![i]).unwrap(), move |y: &[f64]| (y[0] - c).powi(2)));
    }
    let region = if boxed {
        FeasibleRegion::uniform_box(n, -1.5, 1.25).unwrap()
    } else {
        FeasibleRegion::Unbounded
    };
    let x0 = region.project(x0);
    SeparableProblem::new(n, subs, region, x0).unwrap()
}

fn case() -> impl Strategy<Value = SeparableProblem> {
    (2usize..7, any::<bool>()).prop_flat_map(|(n, boxed)| {
        let pair = (0..n, 0..n).prop_filter("distinct", |(a, b)| a != b);
        (
            prop::collection::vec(pair, 0..5),
            prop::collection::vec(-2.0f64..2.0, n),
        )
            .prop_map(move |(pairs, x0)| problem(n, &pairs, boxed, &x0))
    })
}

fn cfg() -> LsConfig {
    LsConfig {
        stop_alpha: 1e-3,
        ..LsConfig::default()
    }
}

type Step = (Vec<f64>, f64);

fn path(p: &SeparableProblem, mode: RefineMode) -> (Vec<Step>, u64, Vec<f64>) {
    let mut steps = Vec::new();
    let mut c = EvalCounter::new(p.num_subs());
    let mut obs = |x: &[f64], f: f64| steps.push((x.to_vec(), f));
    let r = solve_observed(p, p.x0(), &cfg(), &mut c, mode, &mut obs).unwrap();
    assert_eq!(r.evals, c);
    (steps, c.total(), r.final_x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sals_reproduces_ls(p in case()) {
        let (ls_steps, ls_evals, ls_x) = path(&p, RefineMode::Ls);
        let (sals_steps, sals_evals, sals_x) = path(&p, RefineMode::Sals);
        prop_assert_eq!(ls_steps, sals_steps);
        prop_assert_eq!(ls_x, sals_x);
        // every coordinate has its own quadratic, so no coordinate touches all blocks
        prop_assert!(sals_evals < ls_evals);
    }

    #[test]
    fn accepted_steps_decrease_sufficiently(p in case()) {
        let (steps, _, x) = path(&p, RefineMode::Sals);
        let gamma = cfg().gamma;
        let mut prev = (p.x0().to_vec(), p.value_uncounted(p.x0()));
        for (xs, f) in steps {
            prop_assert!(p.region().contains(&xs, 0.0));
            let moved: Vec<f64> = xs.iter().zip(&prev.0).map(|(a, b)| (a - b).abs()).filter(|d| *d > 0.0).collect();
            prop_assert_eq!(moved.len(), 1);
            let alpha = moved[0];
            prop_assert!(f <= prev.1 - gamma * alpha * alpha + 1e-12 * prev.1.abs().max(1.0));
            prev = (xs, f);
        }
        prop_assert!(p.region().contains(&x, 0.0));
    }
}
