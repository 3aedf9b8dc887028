//! Allowable flow sets.
//!
//! A flow set `T` is closed, convex, downward closed and contains the origin.
//! Everything the solvers need from a set is exposed through three oracles:
//! membership, the support function `f(ξ) = sup { ξᵀx : x ∈ T }` with a
//! maximizer, and the Minkowski gauge `φ(x) = inf { λ > 0 : x/λ ∈ T }`.
//!
//! Because the sets are downward closed, the support function is `+∞` as soon
//! as any price component is negative.

mod builtin;
mod spec;

use std::fmt;
use std::sync::Arc;

pub use builtin::{
    CappedConcaveEdge, Gain, HalfLineEdge, LinearTickEdge, PiecewiseLinearGain, ProductMarketEdge,
};
pub use spec::{GainSpec, SetSpec};

use crate::error::{Error, Result};

/// Default tolerance for membership tests.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Gauge values beyond this are reported as `+∞`.
pub const GAUGE_LIMIT: f64 = 1e12;

/// Shared handle to a flow set.
pub type SetRef = Arc<dyn FlowSet>;

/// Value of the support function together with a maximizer when one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub value: f64,
    pub maximizer: Option<Vec<f64>>,
}

impl Support {
    pub fn attained(value: f64, maximizer: Vec<f64>) -> Self {
        Self {
            value,
            maximizer: Some(maximizer),
        }
    }

    /// Finite supremum that no point of the set achieves.
    pub fn unattained(value: f64) -> Self {
        Self {
            value,
            maximizer: None,
        }
    }

    pub fn unbounded() -> Self {
        Self {
            value: f64::INFINITY,
            maximizer: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Oracle contract for an allowable flow set.
///
/// Implementors provide the unchecked oracles `contains` and `support_of`; the
/// checked entry points `membership`, `support` and `gauge` validate the input
/// length first.
pub trait FlowSet: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// Elementwise bound `b` with `x <= b` for every `x` in the set
    /// (components may be `+∞`).
    fn upper_bound(&self) -> Vec<f64>;

    /// Membership with additive tolerance `tol` on each defining inequality,
    /// scaled by `max(1, |rhs|)`. `x.len()` must equal `dim()`.
    fn contains(&self, x: &[f64], tol: f64) -> bool;

    /// Support function at `price`. `price.len()` must equal `dim()`.
    fn support_of(&self, price: &[f64]) -> Support;

    /// Minkowski gauge to absolute accuracy `tol`.
    fn gauge_of(&self, x: &[f64], tol: f64) -> f64 {
        bisect_gauge(self, x, tol)
    }

    /// False when `support_of` only returns an upper estimate.
    fn exact_support(&self) -> bool {
        true
    }

    /// Document representation, for the built-in families.
    fn spec(&self) -> Option<SetSpec> {
        None
    }

    fn membership(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains(x, tol))
    }

    fn support(&self, price: &[f64]) -> Result<Support> {
        check_dim(self.dim(), price.len())?;
        Ok(self.support_of(price))
    }

    fn gauge(&self, x: &[f64], tol: f64) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.gauge_of(x, tol))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `lhs <= rhs` up to `tol * max(1, |rhs|)`.
#[inline]
pub fn le_tol(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs <= rhs + tol * rhs.abs().max(1.0)
}

#[inline]
pub(crate) fn any_negative(price: &[f64]) -> bool {
    price.iter().any(|p| *p < 0.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled(x: &[f64], factor: f64) -> Vec<f64> {
    x.iter().map(|v| v * factor).collect()
}

/// Slack of the membership tests inside [`bisect_gauge`]: a few ulps, so
/// points on a flat face do not flip in and out of the set on rounding.
const GAUGE_SLACK: f64 = 8.0 * f64::EPSILON;

/// Gauge by bisection over `λ` on membership of `x/λ` (up to rounding).
///
/// Returns 0 for the origin and for recession directions (`x/λ` stays in the
/// set for arbitrarily small `λ`), and `+∞` when no `λ <= GAUGE_LIMIT` works.
pub fn bisect_gauge<S: FlowSet + ?Sized>(set: &S, x: &[f64], tol: f64) -> f64 {
    if x.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    if set.contains(&scaled(x, GAUGE_LIMIT), GAUGE_SLACK) {
        return 0.0;
    }
    let mut hi = 1.0;
    while !set.contains(&scaled(x, 1.0 / hi), GAUGE_SLACK) {
        hi *= 2.0;
        if hi > GAUGE_LIMIT {
            return f64::INFINITY;
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    let tol = tol.max(f64::EPSILON * hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if set.contains(&scaled(x, 1.0 / mid), GAUGE_SLACK) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Number of fan directions used by the 2-D separation test.
pub const FAN_DIRECTIONS: usize = 720;

/// Number of quasi-random directions used by the separation test above 2-D.
pub const HIGH_DIM_DIRECTIONS: usize = 4096;

/// Outer membership test through the support function: `x` passes when
/// `ξᵀx <= f(ξ)` (with tolerance) for every tested direction `ξ` on the
/// probability simplex. A downward-closed closed convex set is exactly the
/// intersection of these halfspaces, so the test never rejects a member.
///
/// In 2-D the fan minimum is refined by golden-section search, which is exact
/// because `t ↦ f(t, 1-t) - (t, 1-t)ᵀx` is convex.
pub fn separation_contains<S: FlowSet + ?Sized>(set: &S, x: &[f64], tol: f64) -> bool {
    let d = x.len();
    let margin = |xi: &[f64]| -> bool {
        let f = set.support_of(xi).value;
        le_tol(dot(xi, x), f, tol)
    };
    match d {
        0 => true,
        1 => margin(&[1.0]),
        2 => {
            let gap = |t: f64| {
                let xi = [t, 1.0 - t];
                set.support_of(&xi).value - dot(&xi, x)
            };
            let mut best = 0usize;
            let mut best_gap = f64::INFINITY;
            for k in 0..FAN_DIRECTIONS {
                let t = k as f64 / (FAN_DIRECTIONS - 1) as f64;
                let xi = [t, 1.0 - t];
                if !margin(&xi) {
                    return false;
                }
                let v = gap(t);
                if v < best_gap {
                    best_gap = v;
                    best = k;
                }
            }
            let step = 1.0 / (FAN_DIRECTIONS - 1) as f64;
            let lo = (best as f64 - 1.0).max(0.0) * step;
            let hi = ((best as f64 + 1.0) * step).min(1.0);
            let t = golden_section_min(gap, lo, hi, 1e-13);
            margin(&[t, 1.0 - t])
        }
        _ => {
            for j in 0..d {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                if !margin(&e) {
                    return false;
                }
            }
            let mut halton = Halton::new(d);
            for _ in 0..HIGH_DIM_DIRECTIONS {
                let xi = halton.next_simplex_point();
                if !margin(&xi) {
                    return false;
                }
            }
            true
        }
    }
}

/// Minimizer of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section_min<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Halton sequence mapped onto the probability simplex.
struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    fn new(dim: usize) -> Self {
        Self { dim, index: 1 }
    }

    fn radical_inverse(mut i: u64, base: u64) -> f64 {
        let inv = 1.0 / base as f64;
        let mut out = 0.0;
        let mut scale = inv;
        while i > 0 {
            out += (i % base) as f64 * scale;
            i /= base;
            scale *= inv;
        }
        out
    }

    fn next_simplex_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        let mut e: Vec<f64> = (0..self.dim)
            .map(|j| {
                // dimensions beyond the prime table reuse bases with an offset index
                let base = PRIMES[j % PRIMES.len()];
                let u = Self::radical_inverse(i + (j / PRIMES.len()) as u64 * 7919, base);
                -(u.max(1e-12)).ln()
            })
            .collect();
        let total: f64 = e.iter().sum();
        e.iter_mut().for_each(|v| *v /= total);
        e
    }
}
