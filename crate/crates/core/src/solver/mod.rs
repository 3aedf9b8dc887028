//! Dual decomposition for flow problems with zero edge utilities, with or
//! without fixed fees.
//!
//! With the multiplier `ν` on `Σ Aᵢxᵢ - y`, the dual function is
//!
//! ```text
//! g(ν) = Ū(ν) + Σᵢ max(fᵢ(Aᵢᵀν) - qᵢ, 0),   Ū(ν) = sup_y U(y) - νᵀy,
//! ```
//!
//! finite only for `ν >= 0`. Each edge term is an independent support-function
//! evaluation, so edges are processed in parallel and reduced in index order.

mod lbfgs;
mod report;

use std::time::Instant;

pub use lbfgs::{
    minimize as lbfgs_minimize, projected_gradient_norm, LbfgsOptions, LbfgsResult, Status,
};
pub use report::{verify_optimality, Certificate, EdgeSolution, SolutionDocument, SolveReport};

use crate::conic::{conic_rewrite, ConicInstance};
use crate::error::{Error, Result};
use crate::model::{Conjugate, Instance, Utility};
use crate::par::{self, Exec};
use crate::sets::check_dim;

/// Relative tolerance for declaring `fᵢ(ξᵢ) = qᵢ` a tie.
pub const TIE_TOL: f64 = 1e-7;

/// Tied edges beyond this count are all set active instead of enumerated.
pub const ENUMERATION_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub lbfgs: LbfgsOptions,
    /// The dual is declared unbounded (primal infeasible) once `g` drops
    /// below this value.
    pub floor: f64,
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lbfgs: LbfgsOptions::default(),
            floor: -1e12,
            exec: Exec::default(),
        }
    }
}

impl SolveOptions {
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.lbfgs.max_iter = max_iter;
        self
    }

    pub fn with_grad_tol(mut self, grad_tol: f64) -> Self {
        self.lbfgs.grad_tol = grad_tol;
        self
    }
}

/// Result of one edge subproblem at the current prices.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    /// `fᵢ(Aᵢᵀν)`.
    pub support: f64,
    /// `max(fᵢ - qᵢ, 0)`.
    pub value: f64,
    /// Maximizer of the support function, when attained.
    pub maximizer: Option<Vec<f64>>,
    /// `-1` when the edge is used, `0` otherwise.
    pub lambda: f64,
    /// `fᵢ` is within the tie tolerance of a positive fee.
    pub tied: bool,
}

fn classify(support: f64, fee: f64, maximizer: Option<Vec<f64>>, value: f64) -> EdgeRecord {
    let band = TIE_TOL * fee.max(1.0);
    let tied = fee > 0.0 && (support - fee).abs() <= band;
    let lambda = if support >= fee - band { -1.0 } else { 0.0 };
    EdgeRecord {
        support,
        value,
        maximizer,
        lambda,
        tied,
    }
}

/// Dual function data at one price vector.
#[derive(Debug, Clone)]
pub struct DualState {
    pub nu: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub records: Vec<EdgeRecord>,
    pub status: Status,
    pub iterations: usize,
    /// Dual values of accepted iterates.
    pub trace: Vec<f64>,
}

impl DualState {
    pub fn tie_count(&self) -> usize {
        self.records.iter().filter(|r| r.tied).count()
    }
}

/// What the dual machinery needs from a problem form.
pub(crate) trait DualModel: Sync {
    fn instance(&self) -> &Instance;

    /// Length of the price vector.
    fn dim(&self) -> usize {
        self.instance().n()
    }

    /// Price coordinates held fixed at their starting value.
    fn pinned(&self) -> std::ops::Range<usize> {
        0..0
    }

    fn conjugate(&self, nu: &[f64]) -> Result<Conjugate> {
        self.instance().utility().conjugate(nu)
    }

    fn edge_record(&self, i: usize, nu: &[f64]) -> EdgeRecord;

    fn start(&self) -> Vec<f64> {
        let floor = self.instance().utility().price_floor();
        match self.instance().utility() {
            Utility::Linear { c } | Utility::Quadratic { c, .. } => {
                c.iter().zip(&floor).map(|(a, b)| a.max(*b)).collect()
            }
            Utility::LinearAboveThreshold { .. } => floor,
        }
    }

    fn lower_bounds(&self) -> Vec<f64> {
        self.instance().utility().price_floor()
    }
}

struct Original<'a>(&'a Instance);

impl DualModel for Original<'_> {
    fn instance(&self) -> &Instance {
        self.0
    }

    fn edge_record(&self, i: usize, nu: &[f64]) -> EdgeRecord {
        let e = &self.0.edges()[i];
        let s = e.set().support_of(&e.pull(nu));
        let value = (s.value - e.fee()).max(0.0);
        classify(s.value, e.fee(), s.maximizer, value)
    }
}

/// The conic form: one extra price coordinate for the `Σ λᵢ` node, pinned at
/// 0 because `Ũ(y, t) = U(y)` is constant in `t`; each edge term is the
/// clipped-cone support at `(Aᵢᵀν, qᵢ)`.
impl DualModel for ConicInstance<'_> {
    fn instance(&self) -> &Instance {
        ConicInstance::instance(self)
    }

    fn dim(&self) -> usize {
        ConicInstance::dim(self)
    }

    fn pinned(&self) -> std::ops::Range<usize> {
        let n = self.instance().n();
        n..n + 1
    }

    fn conjugate(&self, nu: &[f64]) -> Result<Conjugate> {
        let n = self.instance().n();
        check_dim(n + 1, nu.len())?;
        if nu[n] != 0.0 {
            return Ok(Conjugate {
                value: f64::INFINITY,
                maximizer: None,
            });
        }
        let mut c = self.instance().utility().conjugate(&nu[..n])?;
        if let Some(y) = c.maximizer.as_mut() {
            y.push(0.0);
        }
        Ok(c)
    }

    fn edge_record(&self, i: usize, nu: &[f64]) -> EdgeRecord {
        let sel = self.selector(i);
        let mut price: Vec<f64> = sel.iter().map(|&j| nu[j]).collect();
        let last = price.len() - 1;
        price[last] += self.fee(i);
        let clipped = self.cone(i).support_of(&price);
        let base = self.cone(i).cone().base().support_of(&price[..last]);
        classify(base.value, self.fee(i), base.maximizer, clipped.value)
    }

    fn start(&self) -> Vec<f64> {
        let mut s = Original(self.instance()).start();
        s.push(0.0);
        s
    }

    fn lower_bounds(&self) -> Vec<f64> {
        let mut lb = self.instance().utility().price_floor();
        lb.push(0.0);
        lb
    }
}

/// `(g, gradient, records)` at `nu`. The gradient is `-y(ν) + Σ Aᵢxᵢ*` over
/// active edges; for a linear utility every `y` maximizes `Ū` at `ν = c`,
/// and `y = Σ Aᵢxᵢ*` is chosen so the returned subgradient is 0.
fn evaluate_model<M: DualModel>(
    model: &M,
    nu: &[f64],
    exec: Exec,
) -> Result<(f64, Vec<f64>, Vec<EdgeRecord>)> {
    check_dim(model.dim(), nu.len())?;
    let conj = model.conjugate(nu)?;
    if !conj.value.is_finite() {
        return Err(Error::OutsideDomain);
    }
    let inst = model.instance();
    let records = par::map_indexed(exec, inst.m(), |i| model.edge_record(i, nu));
    let mut value = conj.value;
    let mut flow = vec![0.0; model.dim()];
    for (i, (e, r)) in inst.edges().iter().zip(&records).enumerate() {
        if !r.value.is_finite() {
            return Err(Error::OutsideDomain);
        }
        value += r.value;
        if r.lambda < 0.0 {
            let x = r.maximizer.as_ref().ok_or(Error::Unattained(i))?;
            e.scatter(x, &mut flow);
        }
    }
    let mut gradient = match &conj.maximizer {
        Some(y) => flow.iter().zip(y).map(|(a, b)| a - b).collect(),
        None => vec![0.0; model.dim()],
    };
    for j in model.pinned() {
        gradient[j] = 0.0;
    }
    Ok((value, gradient, records))
}

/// Dual value, a (sub)gradient, and the per-edge records at `nu`.
pub fn dual_value_and_gradient(instance: &Instance, nu: &[f64], exec: Exec) -> Result<DualState> {
    instance.check_solvable()?;
    let (value, gradient, records) = evaluate_model(&Original(instance), nu, exec)?;
    Ok(DualState {
        nu: nu.to_vec(),
        value,
        gradient,
        records,
        status: Status::ShortCircuit,
        iterations: 0,
        trace: vec![value],
    })
}

/// Dual value only; `+∞` outside the domain.
pub fn dual_value(instance: &Instance, nu: &[f64], exec: Exec) -> f64 {
    match evaluate_model(&Original(instance), nu, exec) {
        Ok((v, _, _)) => v,
        Err(Error::Unattained(_)) => {
            // the value is still well defined when a maximizer is not attained
            let model = Original(instance);
            let conj = match model.conjugate(nu) {
                Ok(c) => c.value,
                Err(_) => return f64::INFINITY,
            };
            (0..instance.m())
                .map(|i| model.edge_record(i, nu).value)
                .sum::<f64>()
                + conj
        }
        Err(_) => f64::INFINITY,
    }
}

fn minimize_model<M: DualModel>(model: &M, opts: &SolveOptions) -> Result<DualState> {
    let exec = opts.exec;
    let utility = model.instance().utility();
    match utility {
        Utility::Linear { .. } => {
            let nu = model.start();
            let (value, gradient, records) = evaluate_model(model, &nu, exec)?;
            Ok(DualState {
                nu,
                value,
                gradient,
                records,
                status: Status::ShortCircuit,
                iterations: 0,
                trace: vec![value],
            })
        }
        Utility::LinearAboveThreshold { .. } => minimize_scalar(model, opts),
        Utility::Quadratic { .. } => {
            let lb = model.lower_bounds();
            let mut start = model.start();
            if let Err(Error::Unattained(_)) = evaluate_model(model, &start, exec) {
                // a zero price can leave a support value unattained; nudge
                // those coordinates into the interior
                let scale = start.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                let pinned = model.pinned();
                for (j, v) in start.iter_mut().enumerate() {
                    if *v <= lb[j] && !pinned.contains(&j) {
                        *v = lb[j] + 1e-6 * scale;
                    }
                }
            }
            let r = lbfgs_minimize(
                |nu| evaluate_model(model, nu, exec),
                &start,
                &lb,
                &opts.lbfgs,
            )?;
            if r.value < opts.floor {
                return Err(Error::UnboundedDual);
            }
            Ok(DualState {
                nu: r.x,
                value: r.value,
                gradient: r.gradient,
                records: r.extra,
                status: r.status,
                iterations: r.iterations,
                trace: r.trace,
            })
        }
    }
}

/// One free price coordinate (threshold utility): bracket the sign change of
/// the subgradient, then bisect. Exact for the piecewise-linear duals this
/// utility produces.
fn minimize_scalar<M: DualModel>(model: &M, opts: &SolveOptions) -> Result<DualState> {
    let exec = opts.exec;
    let lb = model.lower_bounds();
    let at = |t: f64| -> Result<(f64, Vec<f64>, Vec<EdgeRecord>)> {
        let mut nu = lb.clone();
        nu[0] = t;
        evaluate_model(model, &nu, exec)
    };
    let lo0 = lb[0];
    let mut evals = 0usize;
    let mut trace = Vec::new();
    let finish = |t: f64, r: (f64, Vec<f64>, Vec<EdgeRecord>), status, evals, trace: Vec<f64>| {
        let mut nu = lb.clone();
        nu[0] = t;
        DualState {
            nu,
            value: r.0,
            gradient: r.1,
            records: r.2,
            status,
            iterations: evals,
            trace,
        }
    };

    let first = at(lo0)?;
    trace.push(first.0);
    if first.1[0] >= 0.0 {
        return Ok(finish(lo0, first, Status::Converged, 0, trace));
    }
    let mut lo = lo0;
    let mut width = lo0.abs().max(1.0);
    let mut hi;
    loop {
        hi = lo0 + width;
        let r = at(hi)?;
        evals += 1;
        if r.0 < opts.floor || hi > 1e15 {
            return Err(Error::UnboundedDual);
        }
        if r.1[0] == 0.0 {
            trace.push(r.0);
            return Ok(finish(hi, r, Status::Converged, evals, trace));
        }
        if r.1[0] > 0.0 {
            break;
        }
        lo = hi;
        width *= 2.0;
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..opts.lbfgs.max_iter.max(200) {
        if hi - lo <= opts.lbfgs.grad_tol * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = at(mid)?;
        evals += 1;
        if r.0 < best.0 {
            best = (r.0, mid);
            trace.push(r.0);
        }
        match r.1[0].partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Less) => lo = mid,
            Some(std::cmp::Ordering::Greater) => hi = mid,
            _ => return Ok(finish(mid, r, Status::Converged, evals, trace)),
        }
    }
    let candidates = [lo, hi, best.1];
    let mut chosen = None;
    for t in candidates {
        let r = at(t)?;
        if chosen
            .as_ref()
            .is_none_or(|(_, c): &(f64, (f64, Vec<f64>, Vec<EdgeRecord>))| r.0 < c.0)
        {
            chosen = Some((t, r));
        }
    }
    let (t, r) = chosen.expect("at least one candidate");
    Ok(finish(t, r, Status::Converged, evals, trace))
}

/// Minimizes the dual function over the box of nonnegative prices.
pub fn minimize_dual(instance: &Instance, opts: &SolveOptions) -> Result<DualState> {
    instance.check_solvable()?;
    minimize_model(&Original(instance), opts)
}

fn recover_model<M: DualModel>(
    model: &M,
    state: &DualState,
    started: Instant,
) -> Result<SolveReport> {
    let inst = model.instance();
    let mut flows: Vec<Vec<f64>> = Vec::with_capacity(inst.m());
    let mut lambdas = Vec::with_capacity(inst.m());
    for (i, (e, r)) in inst.edges().iter().zip(&state.records).enumerate() {
        if r.lambda < 0.0 {
            flows.push(r.maximizer.clone().ok_or(Error::Unattained(i))?);
            lambdas.push(-1.0);
        } else {
            flows.push(vec![0.0; e.nodes().len()]);
            lambdas.push(0.0);
        }
    }
    let tied: Vec<usize> = state
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.tied)
        .map(|(i, _)| i)
        .collect();
    let mut primal = inst.objective(&flows, &lambdas)?;
    if !tied.is_empty() && tied.len() <= ENUMERATION_LIMIT {
        let active_flows = flows.clone();
        let mut best_mask = (1usize << tied.len()) - 1;
        for mask in (0..best_mask).rev() {
            let mut f = active_flows.clone();
            let mut l = lambdas.clone();
            for (b, &i) in tied.iter().enumerate() {
                if mask & (1 << b) == 0 {
                    f[i].iter_mut().for_each(|v| *v = 0.0);
                    l[i] = 0.0;
                }
            }
            let p = inst.objective(&f, &l)?;
            if p > primal {
                primal = p;
                best_mask = mask;
            }
        }
        for (b, &i) in tied.iter().enumerate() {
            if best_mask & (1 << b) == 0 {
                flows[i].iter_mut().for_each(|v| *v = 0.0);
                lambdas[i] = 0.0;
            }
        }
    }
    let y_hat = inst.net_flow(&flows)?;
    let dual = state.value;
    let abs_gap = dual - primal;
    Ok(SolveReport {
        dual_value: dual,
        primal_value: primal,
        abs_gap,
        rel_gap: abs_gap / (1.0 + dual.abs()),
        nu: state.nu[..inst.n()].to_vec(),
        flows,
        lambdas,
        y_hat,
        edge_values: state.records.iter().map(|r| r.value).collect(),
        tied: state.records.iter().map(|r| r.tied).collect(),
        tie_count: tied.len(),
        iterations: state.iterations,
        status: state.status,
        trace: state.trace.clone(),
        runtime: started.elapsed(),
    })
}

/// Primal point from the edge maximizers at the final prices, with tied
/// edges' activations chosen by enumeration when there are few of them.
pub fn recover_primal(state: &DualState, instance: &Instance) -> Result<SolveReport> {
    recover_model(&Original(instance), state, Instant::now())
}

/// Minimizes the dual and recovers a primal point.
pub fn solve(instance: &Instance, opts: &SolveOptions) -> Result<SolveReport> {
    let started = Instant::now();
    instance.check_solvable()?;
    let model = Original(instance);
    let state = minimize_model(&model, opts)?;
    recover_model(&model, &state, started)
}

/// Solves the conic form of `instance` through the same dual machinery.
pub fn solve_conic(instance: &Instance, opts: &SolveOptions) -> Result<SolveReport> {
    let started = Instant::now();
    instance.check_solvable()?;
    let conic = conic_rewrite(instance);
    let state = minimize_model(&conic, opts)?;
    recover_model(&conic, &state, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Edge;
    use crate::sets::{CappedConcaveEdge, SetRef};
    use std::sync::Arc;

    fn single(fee: f64, utility: Utility) -> Instance {
        let set: SetRef = Arc::new(CappedConcaveEdge::rational(1.0).unwrap());
        Instance::new(2, vec![Edge::new(set, vec![0, 1], fee).unwrap()], utility).unwrap()
    }

    #[test]
    fn dual_examples_at_c() {
        let inst = single(0.5, Utility::linear(vec![1.0, 4.0]));
        let st = dual_value_and_gradient(&inst, &[1.0, 4.0], Exec::Sequential).unwrap();
        assert!((st.value - 0.5).abs() < 1e-12);
        assert_eq!(st.records[0].lambda, -1.0);
        let inst = single(2.0, Utility::linear(vec![1.0, 4.0]));
        let st = dual_value_and_gradient(&inst, &[1.0, 4.0], Exec::Sequential).unwrap();
        assert_eq!(st.value, 0.0);
        assert_eq!(st.records[0].lambda, 0.0);
        assert!(dual_value_and_gradient(&inst, &[1.0, 3.0], Exec::Sequential).is_err());
    }

    #[test]
    fn gradient_without_edge_flow() {
        // prices where the edge cannot pay: the edge maximizer is 0
        let inst = single(0.0, Utility::quadratic(vec![2.0, 1.0], 0.5));
        let nu = [3.0, 1.0];
        let st = dual_value_and_gradient(&inst, &nu, Exec::Sequential).unwrap();
        assert_eq!(st.records[0].maximizer.as_ref().unwrap(), &vec![0.0, 0.0]);
        let expected: Vec<f64> = [2.0, 1.0]
            .iter()
            .zip(&nu)
            .map(|(c, v)| -(c - v) / 0.5)
            .collect();
        assert_eq!(st.gradient, expected);
    }

    #[test]
    fn linear_short_circuit_and_recovery() {
        let inst = single(0.5, Utility::linear(vec![1.0, 4.0]));
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, Status::ShortCircuit);
        assert_eq!(r.nu, vec![1.0, 4.0]);
        assert_eq!(r.y_hat, vec![-1.0, 0.5]);
        assert!((r.primal_value - 0.5).abs() < 1e-12 && (r.dual_value - 0.5).abs() < 1e-12);
        assert_eq!(verify_optimality(&r, 1e-9), Certificate::Optimal);

        let inst = single(2.0, Utility::linear(vec![1.0, 4.0]));
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.y_hat, vec![0.0, 0.0]);
        assert_eq!((r.primal_value, r.dual_value), (0.0, 0.0));
    }

    #[test]
    fn quadratic_matches_grid_optimum() {
        // maximize 4y₂ - (y₁² + y₂²)/2 with y = (-w, h(w)), w ∈ [0, 1]
        let inst = single(0.0, Utility::quadratic(vec![0.0, 4.0], 1.0));
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        let grid = (0..=200_000)
            .map(|k| {
                let w = k as f64 / 200_000.0;
                let h = w / (1.0 + w);
                4.0 * h - 0.5 * (w * w + h * h)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (r.dual_value - grid).abs() < 1e-6,
            "{} vs {grid}",
            r.dual_value
        );
        assert!(r.abs_gap.abs() < 1e-6);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn start_is_clamped_to_the_box() {
        let inst = single(0.0, Utility::quadratic(vec![-1.0, 4.0], 1.0));
        let r = solve(&inst, &SolveOptions::default().with_max_iter(0)).unwrap();
        assert_eq!(r.nu[0], 0.0);
    }

    #[test]
    fn tie_enumeration_picks_better_branch() {
        // f = q exactly at ν = c: both activations give the same value 0
        let set: SetRef = Arc::new(crate::sets::LinearTickEdge::new(2.0, 1.0).unwrap());
        let inst = Instance::new(
            2,
            vec![Edge::new(set, vec![0, 1], 1.0).unwrap()],
            Utility::linear(vec![1.0, 1.0]),
        )
        .unwrap();
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.tie_count, 1);
        assert!(r.tied[0]);
        assert!(r.primal_value.abs() < 1e-12);
    }

    #[test]
    fn conic_form_agrees() {
        let inst = single(0.0, Utility::linear(vec![1.0, 4.0]));
        let a = solve(&inst, &SolveOptions::default()).unwrap();
        let b = solve_conic(&inst, &SolveOptions::default()).unwrap();
        assert!((a.dual_value - 1.0).abs() < 1e-12);
        assert_eq!(a.dual_value, b.dual_value);
        let inst = single(0.3, Utility::quadratic(vec![0.5, 3.0], 0.7));
        let a = solve(&inst, &SolveOptions::default()).unwrap();
        let b = solve_conic(&inst, &SolveOptions::default()).unwrap();
        assert!((a.dual_value - b.dual_value).abs() < 1e-9);
    }

    #[test]
    fn parallel_and_sequential_records_match() {
        let set: SetRef = Arc::new(CappedConcaveEdge::rational(1.0).unwrap());
        let edges: Vec<Edge> = (0..64)
            .map(|k| Edge::new(set.clone(), vec![k % 4, (k + 1) % 4], 0.01 * k as f64).unwrap())
            .collect();
        let inst =
            Instance::new(4, edges, Utility::quadratic(vec![1.0, 2.0, 0.5, 1.5], 0.1)).unwrap();
        let nu = [0.9, 1.7, 0.4, 1.1];
        let a = dual_value_and_gradient(&inst, &nu, Exec::Sequential).unwrap();
        let b = dual_value_and_gradient(&inst, &nu, Exec::Parallel).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.gradient, b.gradient);
    }
}
