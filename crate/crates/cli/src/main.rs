//! `convexflow` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input (bad flags, unreadable or invalid
//! documents, infeasible instances), 3 solver non-convergence. On exit code 3
//! the best-effort output is still written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use convexflow::bench::{
    gen_bench, gen_knapsack, gen_orderbook, run_bench, write_csv, BenchConfig, Grid,
};
use convexflow::fees::{brute_force_optimum, gap_bounds, round, GapBounds, BRUTE_FORCE_LIMIT};
use convexflow::solver::{solve, solve_conic, SolutionDocument, SolveOptions, SolveReport, Status};
use convexflow::{par, Instance};
use serde_json::json;

/// Tolerance of the optimality bracket used to decide whether a stalled
/// solve still counts as converged.
const CERTIFICATE_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "convexflow",
    version,
    about = "Convex and fixed-fee network flow solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance document.
    Generate {
        #[command(subcommand)]
        kind: Generate,
    },
    /// Solve an instance through its dual and write the solution document.
    Solve(SolveArgs),
    /// Round per-edge relaxation points into the fixed-fee sets and check the gap bound.
    Round(RoundArgs),
    /// Run the order-routing benchmark sweep and write the CSV report.
    Bench(BenchArgs),
    /// Solve a knapsack reduction instance by enumeration and compare with subset sum.
    Knapsack(KnapsackArgs),
}

#[derive(Subcommand)]
enum Generate {
    /// Constant-product markets over random asset pairs.
    Bench {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.01)]
        q0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-node instance whose optimum is -b iff a subset of c sums to b.
    Knapsack {
        #[arg(long, value_delimiter = ',', required = true)]
        c: Vec<u64>,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-asset orderbook of linear ticks plus one pool.
    Orderbook {
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value_t = 0.01)]
        q0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolverFlags {
    /// Projected-gradient tolerance of the dual minimization.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration budget of the dual minimization.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

impl SolverFlags {
    fn options(&self) -> anyhow::Result<SolveOptions> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(anyhow!("--tol must be positive, got {}", self.tol));
        }
        Ok(SolveOptions::default()
            .with_grad_tol(self.tol)
            .with_max_iter(self.max_iter))
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance document (JSON).
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Solve the conic rewriting instead of the original form.
    #[arg(long)]
    conic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RoundArgs {
    /// Instance document (JSON).
    instance: PathBuf,
    /// Solution document whose per-edge `x` and `lambda` are the relaxation points.
    relaxation: PathBuf,
    /// Membership tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10, 17, 28])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1e-2])]
    mu: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 1.0])]
    q0: Vec<f64>,
    /// Number of seeds per cell.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// First seed; cells use `seed..seed+seeds`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    /// CSV output path (stdout when omitted). A `.meta.json` sidecar records the generator conventions.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct KnapsackArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    c: Vec<u64>,
    #[arg(long)]
    b: u64,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// How a command failed.
enum Failure {
    Input(anyhow::Error),
    NotConverged(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Converged, short-circuited, or stalled with a certified bracket.
fn settled(report: &SolveReport, bounds: &GapBounds) -> bool {
    match report.status {
        Status::Converged | Status::ShortCircuit => true,
        Status::Stalled => bounds.within_bound(CERTIFICATE_TOL),
        Status::IterationLimit => false,
    }
}

fn cmd_generate(kind: Generate) -> Outcome {
    let (instance, out) = match kind {
        Generate::Bench {
            n,
            mu,
            q0,
            seed,
            out,
        } => (gen_bench(&BenchConfig::new(n, mu, q0, seed))?, out),
        Generate::Knapsack { c, b, out } => (gen_knapsack(&c, b)?, out),
        Generate::Orderbook {
            levels,
            q0,
            seed,
            out,
        } => (gen_orderbook(levels, q0, seed)?, out),
    };
    emit(out.as_deref(), &instance.to_json()?)?;
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Outcome {
    let instance = load_instance(&args.instance)?;
    let opts = args.solver.options()?;
    let report = if args.conic {
        solve_conic(&instance, &opts)?
    } else {
        solve(&instance, &opts)?
    };
    emit(
        args.out.as_deref(),
        &SolutionDocument::from(&report).to_json(),
    )?;
    let bounds = gap_bounds(&report, &instance);
    eprintln!(
        "status {:?}, iterations {}, dual {:.9e}, primal {:.9e}, rel_gap {:.3e}, ties {}, bound (n+1)max q = {:.3e}",
        report.status, report.iterations, report.dual_value, report.primal_value, report.rel_gap, report.tie_count, bounds.sf_bound
    );
    if settled(&report, &bounds) {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "dual minimization ended with status {:?}",
            report.status
        )))
    }
}

fn cmd_round(args: RoundArgs) -> Outcome {
    let instance = load_instance(&args.instance)?;
    let text = fs::read_to_string(&args.relaxation)
        .with_context(|| format!("reading {}", args.relaxation.display()))?;
    let doc: SolutionDocument = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.relaxation.display()))?;
    let points: Vec<(Vec<f64>, f64)> = doc.edges.iter().map(|e| (e.x.clone(), e.lambda)).collect();
    let r = round(&instance, &points, args.tol)?;
    let sf_bound = (instance.n() + 1) as f64 * instance.max_fee();
    let bracket = doc.objective_dual.map(|upper| {
        let bounds = GapBounds { lower: r.objective, upper, sf_bound };
        json!({ "lower": bounds.lower, "upper": bounds.upper, "width": bounds.width(), "within_bound": bounds.within_bound(CERTIFICATE_TOL) })
    });
    let out = json!({
        "objective": r.objective.is_finite().then_some(r.objective),
        "fee_delta": r.fee_delta,
        "sf_bound": sf_bound,
        "bracket": bracket,
        "y_hat": r.y_hat,
        "edges": r.flows.iter().zip(&r.lambdas).map(|(x, l)| json!({ "x": x, "lambda": l })).collect::<Vec<_>>(),
    });
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Outcome {
    if args.n.iter().any(|&n| n < 2) {
        return Err(Failure::Input(anyhow!("--n values must be >= 2")));
    }
    let grid = Grid {
        ns: args.n,
        mus: args.mu,
        q0s: args.q0,
        seeds: (args.seed..args.seed + args.seeds).collect(),
    };
    let rows = run_bench(&grid, &args.solver.options()?);
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    match &args.csv {
        Some(path) => {
            fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?;
            let meta = json!({
                "generator": "splitmix64",
                "stream_order": ["node pairs (redrawn until every node is covered)", "reserves per market", "utility weights"],
                "markets": "round(n^2/4) constant-product markets over distinct random node pairs",
                "reserves": "log-uniform in [1, 100]",
                "utility_weights": "uniform in [0.5, 1.5]",
                "utility": "linear c^T y when mu = 0, else c^T y - (mu/2) |y|^2",
                "grid": { "n": grid.ns, "mu": grid.mus, "q0": grid.q0s, "seeds": grid.seeds },
            });
            let mut meta_path = path.clone().into_os_string();
            meta_path.push(".meta.json");
            fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
                .context("writing metadata")?;
        }
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    let unsettled = rows
        .iter()
        .filter(|r| r.status == "iteration_limit" || r.status.starts_with("error"))
        .count();
    eprintln!("{} rows, {} unsettled", rows.len(), unsettled);
    if unsettled == 0 {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "{unsettled} benchmark cells did not converge"
        )))
    }
}

fn subset_sum_reachable(c: &[u64], b: u64) -> bool {
    let total: u64 = c.iter().sum();
    if b > total {
        return false;
    }
    let mut reach = vec![false; b as usize + 1];
    reach[0] = true;
    for &ci in c {
        for t in (ci as usize..=b as usize).rev() {
            reach[t] |= reach[t - ci as usize];
        }
    }
    reach[b as usize]
}

fn cmd_knapsack(args: KnapsackArgs) -> Outcome {
    let instance = gen_knapsack(&args.c, args.b)?;
    let bf = brute_force_optimum(&instance, BRUTE_FORCE_LIMIT, &args.solver.options()?)?;
    let reachable = subset_sum_reachable(&args.c, args.b);
    let out = json!({
        "c": args.c,
        "b": args.b,
        "optimum": bf.value.is_finite().then_some(bf.value),
        "pattern": bf.pattern,
        "subset_sum_reachable": reachable,
        "optimum_is_minus_b": bf.value == -(args.b as f64),
    });
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    par::init_threads_from_env();
    let outcome = match cli.command {
        Command::Generate { kind } => cmd_generate(kind),
        Command::Solve(a) => cmd_solve(a),
        Command::Round(a) => cmd_round(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Knapsack(a) => cmd_knapsack(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("not converged: {msg}");
            ExitCode::from(3)
        }
    }
}
