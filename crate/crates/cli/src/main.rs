//! `pddf` command-line front end.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use pddf::bench::generate::Generated;
use pddf::bench::profile::{
    data_profile, kappa_grid, performance_profile, write_profile, write_svg, Metric, EPS_LEVELS,
};
use pddf::bench::records::{attach_timings, read_records, write_records, write_timings};
use pddf::bench::runner::{run_suite, solve, RunOptions, SolverKind};
use pddf::bench::suite::SuiteSpec;
use pddf::config::Config;
use pddf::report::write_trace;
use pddf::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_EVALUATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pddf", version, about = "Penalty decomposition derivative-free solver and benchmark harness")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML file with solver settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; overrides the `workers` config key.
    #[arg(long, global = true, env = "PDDF_WORKERS")]
    workers: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
    /// Reserved; every solver is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "pddf-out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem.
    Solve {
        /// Problem file (one suite entry).
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "pddf")]
        solver: String,
        /// Config overrides.
        #[arg(value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run every selected solver on every problem of a suite.
    Bench {
        /// Suite file, or `builtin:acceptance` / `builtin:cps`.
        #[arg(long)]
        suite: String,
        /// Comma-separated solvers.
        #[arg(long, value_delimiter = ',', default_value = "pddf,ls")]
        solver: Vec<String>,
        /// Artificial delay added to every sub-function evaluation.
        #[arg(long)]
        eval_delay_ms: Option<f64>,
        #[arg(value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compute data and performance profiles from a records CSV.
    Profile {
        /// Records CSV; defaults to `<out>/records.csv`.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Accuracy level; both 1e-2 and 1e-4 when omitted.
        #[arg(long)]
        eps: Option<f64>,
        /// Largest budget, in groups of m (n + 1) evaluations.
        #[arg(long, default_value_t = 100)]
        budget: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pddf: {e}");
            ExitCode::from(match e {
                Error::Evaluation(_) => EXIT_EVALUATION,
                _ => EXIT_USAGE,
            })
        }
    }
}

fn load_config(common: &Common, overrides: &[String]) -> pddf::Result<Config> {
    let base = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let mut cfg = base.with_overrides(overrides)?;
    if let Some(w) = common.workers {
        cfg.workers = w;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> pddf::Result<()> {
    if cli.common.seed.is_some() {
        log::debug!("--seed has no effect: all solvers are deterministic");
    }
    let overrides: &[String] = match &cli.command {
        Some(Command::Solve { overrides, .. } | Command::Bench { overrides, .. }) => overrides,
        _ => &[],
    };
    let cfg = load_config(&cli.common, overrides)?;
    if cli.common.show_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let out = &cli.common.out;
    match cli.command {
        None => Err(Error::Usage("no subcommand given; try --help".into())),
        Some(Command::Solve { problem, solver, .. }) => {
            let g = SuiteSpec::load_problem(&problem)?;
            cmd_solve(&g, solver.parse()?, &cfg, out)
        }
        Some(Command::Bench { suite, solver, eval_delay_ms, .. }) => {
            let spec = match suite.strip_prefix("builtin:") {
                Some(name) => SuiteSpec::builtin(name)?,
                None => SuiteSpec::load(Path::new(&suite))?,
            };
            let solvers = solver
                .iter()
                .map(|s| s.trim().parse())
                .collect::<pddf::Result<Vec<SolverKind>>>()?;
            let delay = eval_delay_ms
                .map(|ms| {
                    Duration::try_from_secs_f64(ms / 1e3)
                        .map_err(|_| Error::Usage(format!("invalid --eval-delay-ms {ms}")))
                })
                .transpose()?;
            cmd_bench(&spec, &solvers, &cfg, delay, out)
        }
        Some(Command::Profile { records, eps, budget }) => {
            let path = records.unwrap_or_else(|| out.join("records.csv"));
            cmd_profile(&path, eps, budget, out)
        }
    }
}

fn create(path: &Path) -> pddf::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn cmd_solve(g: &Generated, kind: SolverKind, cfg: &Config, out: &Path) -> pddf::Result<()> {
    let p = &g.problem;
    let res = solve(p, kind, cfg, cfg.workers)?;
    let r = &res.report;
    fs::create_dir_all(out)?;
    let trace_path = out.join("trace.csv");
    write_trace(&r.trace, create(&trace_path)?)?;
    let gap = r.trace.iter().rev().find_map(|row| row.feasibility_gap);
    let residual = p.projected_gradient_inf(&r.final_x);
    let mut summary = String::new();
    summary.push_str(&format!("problem = {:?}\nsolver = {:?}\n", p.name(), kind.as_str()));
    summary.push_str(&format!("n = {}\nm = {}\n", p.dim(), p.num_subs()));
    summary.push_str(&format!("f0 = {:e}\nf = {:e}\n", res.f0, r.final_f));
    for (key, v) in [("residual", residual), ("feasibility_gap", gap)] {
        if let Some(v) = v {
            summary.push_str(&format!("{key} = {v:e}\n"));
        }
    }
    summary.push_str(&format!("evals = {}\nouter_iters = {}\n", r.evals.total(), r.outer_iters));
    summary.push_str(&format!("termination = {:?}\n", r.termination.as_str()));
    summary.push_str(&format!("wall_time_s = {}\n", res.wall_time.as_secs_f64()));
    if r.inexact_x_update {
        summary.push_str("inexact_x_update = true\n");
    }
    if r.inner_cap_hit {
        summary.push_str("inner_cap_hit = true\n");
    }
    let x: Vec<String> = r.final_x.iter().map(|v| v.to_string()).collect();
    summary.push_str(&format!("x = [{}]\n", x.join(", ")));
    fs::write(out.join("solution.toml"), &summary)?;
    print!("{summary}");
    println!("trace = {:?}", trace_path.display().to_string());
    Ok(())
}

fn cmd_bench(
    spec: &SuiteSpec,
    solvers: &[SolverKind],
    cfg: &Config,
    delay: Option<Duration>,
    out: &Path,
) -> pddf::Result<()> {
    let problems = spec.build()?;
    fs::create_dir_all(out)?;
    let traces = out.join("traces");
    let opts = RunOptions {
        eval_delay: delay,
        trace_dir: Some(&traces),
    };
    let records = run_suite(&problems, solvers, cfg, cfg.workers, &opts)?;
    write_records(&records, create(&out.join("records.csv"))?)?;
    write_timings(&records, create(&out.join("timings.csv"))?)?;
    println!(
        "{} runs on {} problems written to {}",
        records.len(),
        problems.len(),
        out.join("records.csv").display()
    );
    Ok(())
}

fn cmd_profile(records_path: &Path, eps: Option<f64>, budget: usize, out: &Path) -> pddf::Result<()> {
    let file = fs::File::open(records_path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", records_path.display())))?;
    let mut records = read_records(file)?;
    let timings = records_path.with_file_name("timings.csv");
    let have_times = timings.exists();
    if have_times {
        attach_timings(&mut records, fs::File::open(&timings)?)?;
    }
    fs::create_dir_all(out)?;
    let levels: Vec<f64> = eps.map_or_else(|| EPS_LEVELS.to_vec(), |e| vec![e]);
    let grid = kappa_grid(budget);
    for eps in levels {
        let tag = format!("eps{eps:e}");
        let data = data_profile(&records, eps, &grid)?;
        let stem = format!("data_profile_{tag}");
        write_profile(&data, create(&out.join(format!("{stem}.csv")))?)?;
        write_svg(
            &data,
            &format!("Data profile, eps = {eps:e}"),
            "budget (groups of m(n+1) evaluations)",
            false,
            create(&out.join(format!("{stem}.svg")))?,
        )?;
        let mut metrics = vec![(Metric::SubEvalsToSolved, "evals")];
        if have_times {
            metrics.push((Metric::WallTime, "time"));
        }
        for (metric, name) in metrics {
            let perf = performance_profile(&records, metric, eps)?;
            let stem = format!("perf_profile_{name}_{tag}");
            write_profile(&perf, create(&out.join(format!("{stem}.csv")))?)?;
            write_svg(
                &perf,
                &format!("Performance profile ({name}), eps = {eps:e}"),
                "performance ratio",
                true,
                create(&out.join(format!("{stem}.svg")))?,
            )?;
        }
        for c in &data {
            println!("eps {eps:e}: {} solves {:.3} within {budget} groups", c.solver, c.last());
        }
    }
    Ok(())
}
