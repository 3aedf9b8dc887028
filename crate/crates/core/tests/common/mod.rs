//! Shared fixtures: built-in set families, samplers for set and cone points,
//! and random instance generators. All randomness comes from SplitMix64 so
//! failures reproduce from the printed seed.

#![allow(dead_code)]

use std::sync::Arc;

use convexflow::model::{Edge, Instance, Utility};
use convexflow::rng::SplitMix64;
use convexflow::sets::{
    CappedConcaveEdge, Gain, HalfLineEdge, LinearTickEdge, PiecewiseLinearGain, ProductMarketEdge,
    SetRef,
};

pub fn capped(cap: f64) -> SetRef {
    Arc::new(CappedConcaveEdge::rational(cap).unwrap())
}

pub fn tabulated() -> SetRef {
    let gain = PiecewiseLinearGain::new(vec![0.5, 1.5], vec![1.2, 0.6, 0.1]).unwrap();
    Arc::new(CappedConcaveEdge::new(Gain::Tabulated(gain), 2.0).unwrap())
}

pub fn tick(price: f64, cap: f64) -> SetRef {
    Arc::new(LinearTickEdge::new(price, cap).unwrap())
}

pub fn market(r1: f64, r2: f64) -> SetRef {
    Arc::new(ProductMarketEdge::new(r1, r2).unwrap())
}

pub fn half_line(cap: f64) -> SetRef {
    Arc::new(HalfLineEdge::new(cap).unwrap())
}

/// One representative of every built-in family.
pub fn families() -> Vec<(&'static str, SetRef)> {
    vec![
        ("capped_rational", capped(1.0)),
        ("capped_tabulated", tabulated()),
        ("linear_tick", tick(0.8, 2.0)),
        ("product_market", market(3.0, 0.5)),
        ("half_line", half_line(2.0)),
    ]
}

/// Uniform point on the probability simplex.
pub fn simplex(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.next_f64()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= s);
    e
}

/// Nonnegative price vector; occasionally with zero components.
pub fn price(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| {
            if rng.next_f64() < 0.05 {
                0.0
            } else {
                rng.uniform(0.0, 3.0)
            }
        })
        .collect()
}

/// A support maximizer at a random strictly positive price.
pub fn boundary_point(set: &SetRef, rng: &mut SplitMix64) -> Vec<f64> {
    loop {
        let xi: Vec<f64> = (0..set.dim()).map(|_| rng.uniform(0.05, 3.0)).collect();
        if let Some(x) = set.support_of(&xi).maximizer {
            return x;
        }
    }
}

/// A member of `set`: a scaled convex combination of two boundary points,
/// pushed down by a random nonnegative vector. Membership follows from
/// convexity, `0 ∈ T`, and downward closure.
pub fn member(set: &SetRef, rng: &mut SplitMix64) -> Vec<f64> {
    let a = boundary_point(set, rng);
    let b = boundary_point(set, rng);
    let theta = rng.next_f64();
    let alpha = if rng.next_f64() < 0.3 {
        1.0
    } else {
        rng.next_f64()
    };
    a.iter()
        .zip(&b)
        .map(|(u, v)| {
            let push = if rng.next_f64() < 0.5 {
                0.0
            } else {
                rng.uniform(0.0, 1.0)
            };
            alpha * (theta * u + (1.0 - theta) * v) - push
        })
        .collect()
}

/// A point of the flow cone `K`: `(λt, -λ)` with `t ∈ T`, or a recession
/// direction `(d, 0)` with `d <= 0`.
pub fn cone_point(set: &SetRef, rng: &mut SplitMix64) -> Vec<f64> {
    if rng.next_f64() < 0.1 {
        let mut p: Vec<f64> = (0..set.dim()).map(|_| -rng.uniform(0.0, 2.0)).collect();
        p.push(0.0);
        return p;
    }
    let lambda = rng.uniform(0.0, 2.0);
    let mut p: Vec<f64> = member(set, rng).iter().map(|v| lambda * v).collect();
    p.push(-lambda);
    p
}

/// Edge families used by random instances, all bounded from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mix {
    /// Families with differentiable support functions.
    Smooth,
    /// Every built-in family, including piecewise-linear ones.
    All,
}

pub fn random_set(rng: &mut SplitMix64, mix: Mix) -> (SetRef, usize) {
    let choices = match mix {
        Mix::Smooth => 3,
        Mix::All => 5,
    };
    match rng.below(choices) {
        0 => (capped(rng.uniform(0.5, 3.0)), 2),
        1 => (
            market(rng.log_uniform(1.0, 20.0), rng.log_uniform(1.0, 20.0)),
            2,
        ),
        2 => (half_line(rng.uniform(0.5, 2.0)), 1),
        3 => (tick(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)), 2),
        _ => (tabulated(), 2),
    }
}

fn distinct_nodes(rng: &mut SplitMix64, n: usize, k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(k);
    while out.len() < k {
        let j = rng.below(n as u64) as usize;
        if !out.contains(&j) {
            out.push(j);
        }
    }
    out
}

/// Random instance with `n` nodes and `m` edges, fees drawn from `fee`.
pub fn random_instance(
    rng: &mut SplitMix64,
    n: usize,
    m: usize,
    mix: Mix,
    fee: impl Fn(&mut SplitMix64) -> f64,
    utility: Utility,
) -> Instance {
    let edges = (0..m)
        .map(|_| {
            let (set, k) = random_set(rng, mix);
            let nodes = distinct_nodes(rng, n, k.min(n));
            let q = fee(rng);
            Edge::new(set, nodes, q).unwrap()
        })
        .collect();
    Instance::new(n, edges, utility).unwrap()
}

pub fn random_quadratic(rng: &mut SplitMix64, n: usize) -> Utility {
    let c = (0..n).map(|_| rng.uniform(0.5, 3.0)).collect();
    Utility::quadratic(c, rng.uniform(0.2, 2.0))
}

pub fn random_linear(rng: &mut SplitMix64, n: usize) -> Utility {
    Utility::linear((0..n).map(|_| rng.uniform(0.5, 3.0)).collect())
}

/// Subset-sum reachability of every target in `0..=Σc`.
pub fn subset_sums(c: &[u64]) -> Vec<bool> {
    let total: u64 = c.iter().sum();
    let mut reach = vec![false; total as usize + 1];
    reach[0] = true;
    for &ci in c {
        for t in (ci as usize..=total as usize).rev() {
            if reach[t - ci as usize] {
                reach[t] = true;
            }
        }
    }
    reach
}

/// Central finite-difference gradient.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[j] += h;
            b[j] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}
