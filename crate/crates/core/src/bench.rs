//! Instance generators and the order-routing benchmark sweep.
//!
//! Benchmark instances are `m = round(n²/4)` constant-product markets over
//! random distinct node pairs with reserves log-uniform in `[1, 100]`, a fixed
//! fee `q₀` on every market, and utility weights `c` uniform in `[0.5, 1.5]`;
//! `μ = 0` selects the linear utility `cᵀy`, `μ > 0` the quadratic
//! `cᵀy - (μ/2)yᵀy`. Everything is drawn from one [`SplitMix64`] stream in
//! this order: node pairs (redrawn as a whole until every node is covered),
//! then reserves edge by edge, then `c`.

use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{Edge, Instance, Utility};
use crate::par::{self, Exec};
use crate::rng::SplitMix64;
use crate::sets::{HalfLineEdge, LinearTickEdge, ProductMarketEdge};
use crate::solver::{solve, SolveOptions};

/// One benchmark cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub mu: f64,
    pub q0: f64,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(n: usize, mu: f64, q0: f64, seed: u64) -> Self {
        Self { n, mu, q0, seed }
    }

    /// `round(n²/4)`.
    pub fn m(&self) -> usize {
        ((self.n * self.n) as f64 / 4.0).round() as usize
    }
}

/// Generates the benchmark instance for `config`; deterministic in the seed.
pub fn gen_bench(config: &BenchConfig) -> Result<Instance> {
    let n = config.n;
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "benchmark needs n >= 2, got {n}"
        )));
    }
    if !(config.mu >= 0.0 && config.mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mu must be >= 0, got {}",
            config.mu
        )));
    }
    if !(config.q0 >= 0.0 && config.q0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "fee must be >= 0, got {}",
            config.q0
        )));
    }
    let m = config.m();
    if 2 * m < n {
        return Err(Error::InvalidParameter(format!(
            "{m} markets cannot cover {n} nodes"
        )));
    }
    let mut rng = SplitMix64::new(config.seed);
    let pairs = loop {
        let pairs: Vec<[usize; 2]> = (0..m)
            .map(|_| {
                let a = rng.below(n as u64) as usize;
                let mut b = rng.below(n as u64 - 1) as usize;
                if b >= a {
                    b += 1;
                }
                [a, b]
            })
            .collect();
        let mut covered = vec![false; n];
        pairs.iter().flatten().for_each(|&j| covered[j] = true);
        if covered.iter().all(|c| *c) {
            break pairs;
        }
    };
    let mut edges = Vec::with_capacity(m);
    for [a, b] in pairs {
        let r1 = rng.log_uniform(1.0, 100.0);
        let r2 = rng.log_uniform(1.0, 100.0);
        edges.push(Edge::new(
            Arc::new(ProductMarketEdge::new(r1, r2)?),
            vec![a, b],
            config.q0,
        )?);
    }
    let c: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 1.5)).collect();
    let utility = if config.mu == 0.0 {
        Utility::linear(c)
    } else {
        Utility::quadratic(c, config.mu)
    };
    Instance::new(n, edges, utility)
}

/// Single-node instance from the knapsack reduction: edges `Tᵢ = {z <= cᵢ}`
/// with fees `qᵢ = cᵢ` and utility `-I(y >= b)`. Its optimum is `-b` exactly
/// when some subset of `c` sums to `b`.
pub fn gen_knapsack(c: &[u64], b: u64) -> Result<Instance> {
    if c.contains(&0) {
        return Err(Error::InvalidParameter(
            "knapsack weights must be >= 1".into(),
        ));
    }
    let edges = c
        .iter()
        .map(|&ci| Edge::new(Arc::new(HalfLineEdge::new(ci as f64)?), vec![0], ci as f64))
        .collect::<Result<Vec<_>>>()?;
    Instance::new(
        1,
        edges,
        Utility::LinearAboveThreshold {
            b: b as f64,
            slope: 0.0,
        },
    )
}

/// Two-asset orderbook demo: `levels` ticks selling asset 0 for asset 1 at
/// prices within 5% of a mid price `p ∈ [0.5, 2]`, `levels` ticks on the
/// reverse side around `1/p`, and one constant-product pool quoting `p`. Tick
/// capacities are log-uniform in `[0.1, 10]`; every edge pays `q0`. The
/// utility values assets at `c = (1, 1/p)`, so exactly the ticks quoting
/// better than mid are worth executing before fees.
pub fn gen_orderbook(levels: usize, q0: f64, seed: u64) -> Result<Instance> {
    if levels == 0 {
        return Err(Error::InvalidParameter(
            "orderbook needs at least one level".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let mid = rng.uniform(0.5, 2.0);
    let mut edges = Vec::with_capacity(2 * levels + 1);
    for (nodes, quote) in [([0, 1], mid), ([1, 0], 1.0 / mid)] {
        for _ in 0..levels {
            let price = quote * (1.0 + rng.uniform(-0.05, 0.05));
            let cap = rng.log_uniform(0.1, 10.0);
            edges.push(Edge::new(
                Arc::new(LinearTickEdge::new(price, cap)?),
                nodes.to_vec(),
                q0,
            )?);
        }
    }
    edges.push(Edge::new(
        Arc::new(ProductMarketEdge::new(50.0, 50.0 * mid)?),
        vec![0, 1],
        q0,
    )?);
    Instance::new(2, edges, Utility::linear(vec![1.0, 1.0 / mid]))
}

/// Cartesian grid of cells, iterated as `n`, then `mu`, then `q0`, then seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub ns: Vec<usize>,
    pub mus: Vec<f64>,
    pub q0s: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Grid {
    /// `n ∈ {10, 17, 28}`, `μ ∈ {0, 1e-2}`, `q₀ ∈ {0.01, 1}`, seeds `0..10`.
    pub fn desk() -> Self {
        Self {
            ns: vec![10, 17, 28],
            mus: vec![0.0, 1e-2],
            q0s: vec![0.01, 1.0],
            seeds: (0..10).collect(),
        }
    }

    pub fn cells(&self) -> Vec<BenchConfig> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &mu in &self.mus {
                for &q0 in &self.q0s {
                    for &seed in &self.seeds {
                        out.push(BenchConfig::new(n, mu, q0, seed));
                    }
                }
            }
        }
        out
    }
}

/// One line of the benchmark report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    pub q0: f64,
    pub seed: u64,
    pub dual_opt: f64,
    pub primal_heur: f64,
    pub rel_gap: f64,
    pub tie_count: usize,
    pub runtime_ms: f64,
    /// Solver status, or `error: ...` when the cell failed.
    pub status: String,
}

pub const CSV_HEADER: [&str; 11] = [
    "n",
    "m",
    "mu",
    "q0",
    "seed",
    "dual_opt",
    "primal_heur",
    "rel_gap",
    "tie_count",
    "runtime_ms",
    "status",
];

/// Runs one cell; failures become rows with NaN numbers and an error status.
pub fn run_cell(config: &BenchConfig, opts: &SolveOptions) -> ReportRow {
    let started = Instant::now();
    let outcome = gen_bench(config).and_then(|inst| solve(&inst, opts));
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let base = ReportRow {
        n: config.n,
        m: config.m(),
        mu: config.mu,
        q0: config.q0,
        seed: config.seed,
        dual_opt: f64::NAN,
        primal_heur: f64::NAN,
        rel_gap: f64::NAN,
        tie_count: 0,
        runtime_ms,
        status: String::new(),
    };
    match outcome {
        Ok(r) => ReportRow {
            dual_opt: r.dual_value,
            primal_heur: r.primal_value,
            rel_gap: r.rel_gap,
            tie_count: r.tie_count,
            status: status_name(r.status).to_string(),
            ..base
        },
        Err(e) => ReportRow {
            status: format!("error: {e}"),
            ..base
        },
    }
}

fn status_name(s: crate::solver::Status) -> &'static str {
    use crate::solver::Status::*;
    match s {
        Converged => "converged",
        IterationLimit => "iteration_limit",
        Stalled => "stalled",
        ShortCircuit => "short_circuit",
    }
}

/// Runs every cell of the grid (cells in parallel under `opts.exec`, each
/// solve sequential) and returns rows in grid order.
pub fn run_bench(grid: &Grid, opts: &SolveOptions) -> Vec<ReportRow> {
    let cells = grid.cells();
    let inner = opts.with_exec(Exec::Sequential);
    par::map_indexed(opts.exec, cells.len(), |k| run_cell(&cells[k], &inner))
}

fn sig(v: f64) -> String {
    format!("{v:.9e}")
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Schema(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            sig(r.mu),
            sig(r.q0),
            r.seed.to_string(),
            sig(r.dual_opt),
            sig(r.primal_heur),
            sig(r.rel_gap),
            r.tie_count.to_string(),
            sig(r.runtime_ms),
            r.status.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Schema(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let bad = |what: &str| Error::Schema(format!("csv: bad {what}"));
    let mut rd = csv::Reader::from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| Error::Schema(format!("csv: {e}")))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad("header"));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Schema(format!("csv: {e}")))?;
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(CSV_HEADER[k]));
        let u = |k: usize| rec[k].parse::<u64>().map_err(|_| bad(CSV_HEADER[k]));
        rows.push(ReportRow {
            n: u(0)? as usize,
            m: u(1)? as usize,
            mu: f(2)?,
            q0: f(3)?,
            seed: u(4)?,
            dual_opt: f(5)?,
            primal_heur: f(6)?,
            rel_gap: f(7)?,
            tie_count: u(8)? as usize,
            runtime_ms: f(9)?,
            status: rec[10].to_string(),
        });
    }
    Ok(rows)
}
