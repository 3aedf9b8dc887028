//! Fixed-fee problems: the nonconvex constraint `(xᵢ, λᵢ) ∈ Qᵢ = {0} ∪ (Tᵢ × {-1})`,
//! rounding of relaxation points into `Qᵢ`, the `(n+1)·maxᵢ qᵢ` gap bound,
//! and a brute-force oracle over activation patterns.

use crate::conic::ClippedCone;
use crate::error::{Error, Result};
use crate::model::{Edge, Instance};
use crate::par::{self, Exec};
use crate::sets::check_dim;
use crate::solver::{solve, SolveOptions, SolveReport};

/// `(x, λ) ∈ {0} ∪ (T × {-1})` up to `tol`.
pub fn q_membership(edge: &Edge, x: &[f64], lambda: f64, tol: f64) -> Result<bool> {
    check_dim(edge.nodes().len(), x.len())?;
    let idle = lambda.abs() <= tol && x.iter().all(|v| v.abs() <= tol);
    let used = (lambda + 1.0).abs() <= tol && edge.set().contains(x, tol);
    Ok(idle || used)
}

/// A point of `Π Qᵢ` obtained by rounding a relaxation point.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundedSolution {
    pub flows: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub objective: f64,
    /// `qᵀ(λ̃ - λ⁰) >= 0`: the extra fees paid relative to the relaxation.
    pub fee_delta: f64,
}

/// Rounds per-edge relaxation points `(x̃ᵢ, λ̃ᵢ) ∈ K̄ᵢ`: points already in `Qᵢ`
/// are kept, every other point becomes `(x̃ᵢ, -1)`, which lies in `Qᵢ` by the
/// dominating-point property. Flows (and so `ŷ`) are unchanged.
pub fn round(instance: &Instance, points: &[(Vec<f64>, f64)], tol: f64) -> Result<RoundedSolution> {
    check_dim(instance.m(), points.len())?;
    let mut flows = Vec::with_capacity(points.len());
    let mut lambdas = Vec::with_capacity(points.len());
    let mut fee_delta = 0.0;
    for (e, (x, lam)) in instance.edges().iter().zip(points) {
        check_dim(e.nodes().len(), x.len())?;
        let mut p = x.clone();
        p.push(*lam);
        if !ClippedCone::new(e.set().clone()).contains(&p, tol) {
            return Err(Error::NotInCone);
        }
        let idle = lam.abs() <= tol && x.iter().all(|v| v.abs() <= tol);
        let rounded = if idle { 0.0 } else { -1.0 };
        fee_delta += e.fee() * (lam - rounded);
        flows.push(x.clone());
        lambdas.push(rounded);
    }
    let y_hat = instance.net_flow(&flows)?;
    let objective = instance.objective(&flows, &lambdas)?;
    Ok(RoundedSolution {
        flows,
        lambdas,
        y_hat,
        objective,
        fee_delta,
    })
}

/// Bracket on the fixed-fee optimum from a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBounds {
    /// Value of the recovered feasible point, `p_h <= p*`.
    pub lower: f64,
    /// Dual value, `d* >= p⁰ >= p*`.
    pub upper: f64,
    /// `(n+1)·maxᵢ qᵢ`, the bound on `p⁰ - p*`.
    pub sf_bound: f64,
}

impl GapBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `upper - lower <= sf_bound + tol·(1 + |upper|)`.
    pub fn within_bound(&self, tol: f64) -> bool {
        self.width() <= self.sf_bound + tol * (1.0 + self.upper.abs())
    }
}

pub fn gap_bounds(report: &SolveReport, instance: &Instance) -> GapBounds {
    GapBounds {
        lower: report.primal_value,
        upper: report.dual_value,
        sf_bound: (instance.n() + 1) as f64 * instance.max_fee(),
    }
}

/// Best activation pattern found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// `p*`, or `-∞` when no pattern is feasible.
    pub value: f64,
    /// Active edges, ascending.
    pub pattern: Vec<usize>,
}

/// Default cap on the number of edges for [`brute_force_optimum`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Solves the fixed-fee problem exactly by enumerating all `2ᵐ` activation
/// patterns. Each pattern is the fee-free convex problem on its active edges,
/// solved with the dual solver, minus the pattern's fees. Ties between
/// patterns go to the lexicographically smallest index list.
pub fn brute_force_optimum(
    instance: &Instance,
    limit: usize,
    opts: &SolveOptions,
) -> Result<BruteForce> {
    let m = instance.m();
    if m > limit || m >= usize::BITS as usize - 1 {
        return Err(Error::BudgetExceeded { edges: m, limit });
    }
    instance.check_solvable()?;
    let free = instance.without_fees();
    let fees = instance.fees();
    let inner = opts.with_exec(Exec::Sequential);
    let values: Vec<Result<f64>> = par::map_indexed(opts.exec, 1usize << m, |mask| {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let fee: f64 = active.iter().map(|&i| fees[i]).sum();
        match solve(&free.restricted(&active), &inner) {
            Ok(r) => Ok(r.dual_value - fee),
            Err(Error::UnboundedDual) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (mask, v) in values.into_iter().enumerate() {
        let v = v?;
        let pattern: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let better = match &best {
            None => true,
            Some((bv, bp)) => v > *bv || (v == *bv && pattern < *bp),
        };
        if better {
            best = Some((v, pattern));
        }
    }
    let (value, pattern) = best.expect("at least the empty pattern");
    Ok(BruteForce { value, pattern })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Utility;
    use crate::sets::{CappedConcaveEdge, HalfLineEdge, SetRef};
    use std::sync::Arc;

    fn capped() -> SetRef {
        Arc::new(CappedConcaveEdge::rational(1.0).unwrap())
    }

    fn single(fee: f64) -> Instance {
        Instance::new(
            2,
            vec![Edge::new(capped(), vec![0, 1], fee).unwrap()],
            Utility::linear(vec![1.0, 4.0]),
        )
        .unwrap()
    }

    fn knapsack(c: &[f64], b: f64) -> Instance {
        let edges = c
            .iter()
            .map(|&ci| Edge::new(Arc::new(HalfLineEdge::new(ci).unwrap()), vec![0], ci).unwrap())
            .collect();
        Instance::new(1, edges, Utility::LinearAboveThreshold { b, slope: 0.0 }).unwrap()
    }

    #[test]
    fn q_membership_examples() {
        let e = Edge::new(capped(), vec![0, 1], 1.0).unwrap();
        assert!(q_membership(&e, &[0.0, 0.0], 0.0, 1e-9).unwrap());
        assert!(q_membership(&e, &[-1.0, 0.5], -1.0, 1e-9).unwrap());
        assert!(!q_membership(&e, &[-0.5, 0.25], -0.5, 1e-9).unwrap());
        assert!(!q_membership(&e, &[-0.5, 0.25], 0.0, 1e-9).unwrap());
    }

    #[test]
    fn round_examples() {
        let edges = (0..3)
            .map(|_| Edge::new(capped(), vec![0, 1], 1.0).unwrap())
            .collect();
        let inst = Instance::new(2, edges, Utility::linear(vec![1.0, 4.0])).unwrap();
        let pts = vec![
            (vec![-1.0, 0.5], -1.0),
            (vec![-0.4, 0.2], -0.4),
            (vec![0.0, 0.0], 0.0),
        ];
        let r = round(&inst, &pts, 1e-9).unwrap();
        assert_eq!(r.lambdas, vec![-1.0, -1.0, 0.0]);
        assert!((r.fee_delta - 0.6).abs() < 1e-12);
        for (e, (x, l)) in inst.edges().iter().zip(r.flows.iter().zip(&r.lambdas)) {
            assert!(q_membership(e, x, *l, 1e-9).unwrap());
        }

        let integral = vec![
            (vec![-1.0, 0.5], -1.0),
            (vec![0.0, 0.0], 0.0),
            (vec![0.0, 0.0], 0.0),
        ];
        let r = round(&inst, &integral, 1e-9).unwrap();
        assert_eq!(r.fee_delta, 0.0);
        assert_eq!(r.lambdas, vec![-1.0, 0.0, 0.0]);

        let one = single(1.0);
        let r = round(&one, &[(vec![-0.5, 0.25], -0.5)], 1e-9).unwrap();
        assert_eq!((r.flows[0].clone(), r.lambdas[0]), (vec![-0.5, 0.25], -1.0));
        assert_eq!(
            round(&one, &[(vec![-0.5, 0.5], -0.5)], 1e-9),
            Err(Error::NotInCone)
        );
    }

    #[test]
    fn gap_bound_examples() {
        let inst = single(0.5);
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        let g = gap_bounds(&r, &inst);
        assert!((g.lower - 0.5).abs() < 1e-12 && (g.upper - 0.5).abs() < 1e-12);
        assert_eq!(g.sf_bound, 1.5);
        let free = inst.without_fees();
        let g = gap_bounds(&solve(&free, &SolveOptions::default()).unwrap(), &free);
        assert_eq!(g.sf_bound, 0.0);
        assert!(g.within_bound(1e-9));
    }

    #[test]
    fn brute_force_examples() {
        let opts = SolveOptions::default();
        let bf = brute_force_optimum(&single(0.5), 20, &opts).unwrap();
        assert!((bf.value - 0.5).abs() < 1e-12);
        assert_eq!(bf.pattern, vec![0]);
        let bf = brute_force_optimum(&single(2.0), 20, &opts).unwrap();
        assert_eq!(bf.value, 0.0);
        assert!(bf.pattern.is_empty());

        let bf = brute_force_optimum(&knapsack(&[2.0, 3.0], 5.0), 20, &opts).unwrap();
        assert_eq!(bf.value, -5.0);
        assert_eq!(bf.pattern, vec![0, 1]);
        let bf = brute_force_optimum(&knapsack(&[2.0, 2.0], 5.0), 20, &opts).unwrap();
        assert_eq!(bf.value, f64::NEG_INFINITY);
        let bf = brute_force_optimum(&knapsack(&[1.0], 0.0), 20, &opts).unwrap();
        assert_eq!(bf.value, 0.0);
        assert!(bf.pattern.is_empty());

        assert!(matches!(
            brute_force_optimum(&single(1.0), 0, &opts),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
