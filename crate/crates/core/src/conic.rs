//! Flow cones, clipped cones and the conic form of an instance.
//!
//! The flow cone of `T` is `K = cl {(x, -λ) : x/λ ∈ T, λ > 0}`; its last
//! coordinate `s = -λ` is the homogenizing variable. `K ∩ (ℝⁿ × [-1, 0])`
//! is the clipped cone, which equals `conv({0} ∪ (T × {-1}))`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Instance, Utility};
use crate::sets::{any_negative, check_dim, le_tol, FlowSet, SetRef, Support, DEFAULT_TOL};

/// Perspective cone of a flow set. It is itself a flow set (closed, convex,
/// downward closed, contains 0) in dimension `dim(T) + 1`.
#[derive(Debug, Clone)]
pub struct FlowCone {
    base: SetRef,
}

impl FlowCone {
    pub fn new(base: SetRef) -> Self {
        Self { base }
    }

    pub fn base(&self) -> &SetRef {
        &self.base
    }

    fn split<'a>(&self, point: &'a [f64]) -> (&'a [f64], f64) {
        let (x, s) = point.split_at(point.len() - 1);
        (x, s[0])
    }

    /// `(x, s) ∈ K`: for `s < 0`, `x/(-s) ∈ T`; for `s` in `[0, tol]`,
    /// `x` must be a recession direction (`gauge(x) <= tol`); `s > tol` is
    /// never in the cone.
    pub fn cone_membership(&self, point: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), point.len())?;
        Ok(self.contains(point, tol))
    }

    /// `(ξ, μ) ∈ K°` (the polar cone) iff `f_T(ξ) <= μ` up to tolerance.
    /// Maximizing `ξᵀ(λt) - μλ` over `t ∈ T`, `λ > 0` gives `λ(f_T(ξ) - μ)`,
    /// which is nonpositive for every `λ` exactly when `f_T(ξ) <= μ`.
    pub fn polar_membership(&self, dual_point: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), dual_point.len())?;
        let (xi, mu) = self.split(dual_point);
        let f = self.base.support_of(xi).value;
        Ok(le_tol(f, mu, tol))
    }

    /// Maps `(x, s)` with `-1 <= s <= 0` in the cone to `(x, -1)`, which is
    /// again in the cone.
    pub fn dominating_completion(&self, point: &[f64], tol: f64) -> Result<Vec<f64>> {
        check_dim(self.dim(), point.len())?;
        let (x, s) = self.split(point);
        if !(s >= -1.0 - tol && s <= tol) || !self.contains(point, tol) {
            return Err(Error::NotInCone);
        }
        let mut out = x.to_vec();
        out.push(-1.0);
        Ok(out)
    }
}

impl FlowSet for FlowCone {
    fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    fn upper_bound(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .base
            .upper_bound()
            .iter()
            .map(|v| if *v <= 0.0 { 0.0 } else { f64::INFINITY })
            .collect();
        b.push(0.0);
        b
    }

    fn contains(&self, point: &[f64], tol: f64) -> bool {
        let (x, s) = self.split(point);
        if s > tol {
            false
        } else if s >= 0.0 {
            self.base.gauge_of(x, 0.1 * tol.max(f64::EPSILON)) <= tol
        } else {
            let t: Vec<f64> = x.iter().map(|v| v / -s).collect();
            self.base.contains(&t, tol)
        }
    }

    /// `0` when `f_T(ξ) <= σ` (with maximizer 0), `+∞` otherwise.
    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let (xi, sigma) = self.split(price);
        if self.base.support_of(xi).value <= sigma {
            Support::attained(0.0, vec![0.0; price.len()])
        } else {
            Support::unbounded()
        }
    }

    fn exact_support(&self) -> bool {
        self.base.exact_support()
    }
}

/// `K ∩ (ℝⁿ × [-1, 0])`.
#[derive(Debug, Clone)]
pub struct ClippedCone {
    cone: FlowCone,
}

impl ClippedCone {
    pub fn new(base: SetRef) -> Self {
        Self {
            cone: FlowCone::new(base),
        }
    }

    pub fn cone(&self) -> &FlowCone {
        &self.cone
    }

    pub fn dim(&self) -> usize {
        self.cone.dim()
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        let s = point[point.len() - 1];
        s >= -1.0 - tol && self.cone.contains(point, tol)
    }

    pub fn membership(&self, point: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), point.len())?;
        Ok(self.contains(point, tol))
    }

    /// `sup { ξᵀx + σs : (x, s) ∈ K̄ } = max(0, f_T(ξ) - σ)` for price
    /// `(ξ, σ)`; the maximizer is `(x*, -1)` when the edge pays, else 0.
    /// `ξ` must be nonnegative for a finite value; `σ` may have any sign.
    pub fn support_of(&self, price: &[f64]) -> Support {
        let (xi, sigma) = price.split_at(price.len() - 1);
        let sigma = sigma[0];
        let s = self.cone.base.support_of(xi);
        if !s.value.is_finite() {
            return Support::unbounded();
        }
        if s.value - sigma > 0.0 {
            Support {
                value: s.value - sigma,
                maximizer: s.maximizer.map(|mut x| {
                    x.push(-1.0);
                    x
                }),
            }
        } else {
            Support::attained(0.0, vec![0.0; price.len()])
        }
    }
}

/// Conic form of an instance, as a view: edge `i` acts on `(xᵢ, λᵢ)` through
/// its node list plus one shared extra coordinate `n` that collects `Σ λᵢ`.
/// The objective is `Ũ(y, t) = U(y)` plus `Ṽᵢ(x, λ) = qᵢλ - I(λ >= -1)`.
#[derive(Debug, Clone)]
pub struct ConicInstance<'a> {
    instance: &'a Instance,
    selectors: Vec<Vec<usize>>,
    cones: Vec<ClippedCone>,
}

pub fn conic_rewrite(instance: &Instance) -> ConicInstance<'_> {
    let n = instance.n();
    let selectors = instance
        .edges()
        .iter()
        .map(|e| {
            let mut s = e.nodes().to_vec();
            s.push(n);
            s
        })
        .collect();
    let cones = instance
        .edges()
        .iter()
        .map(|e| ClippedCone::new(e.set().clone()))
        .collect();
    ConicInstance {
        instance,
        selectors,
        cones,
    }
}

impl<'a> ConicInstance<'a> {
    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    /// Dimension of the conic net-flow space, `n + 1`.
    pub fn dim(&self) -> usize {
        self.instance.n() + 1
    }

    pub fn m(&self) -> usize {
        self.cones.len()
    }

    pub fn selector(&self, i: usize) -> &[usize] {
        &self.selectors[i]
    }

    pub fn cone(&self, i: usize) -> &ClippedCone {
        &self.cones[i]
    }

    pub fn fee(&self, i: usize) -> f64 {
        self.instance.edges()[i].fee()
    }

    pub fn utility(&self) -> &Utility {
        self.instance.utility()
    }

    /// Dense `Ãᵢ` of shape `(n+1) × (nᵢ+1)`, for small-instance checks.
    pub fn selector_matrix(&self, i: usize) -> DMatrix<f64> {
        let sel = &self.selectors[i];
        let mut a = DMatrix::zeros(self.dim(), sel.len());
        for (k, &j) in sel.iter().enumerate() {
            a[(j, k)] = 1.0;
        }
        a
    }

    /// `Σ Ãᵢ(xᵢ, λᵢ)`.
    pub fn net_flow(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_dim(self.m(), points.len())?;
        let mut y = vec![0.0; self.dim()];
        for (sel, p) in self.selectors.iter().zip(points) {
            check_dim(sel.len(), p.len())?;
            for (k, &j) in sel.iter().enumerate() {
                y[j] += p[k];
            }
        }
        Ok(y)
    }

    /// Conic objective at per-edge points `(xᵢ, λᵢ)`; `-∞` when a point
    /// leaves its cone or has `λᵢ < -1`.
    pub fn objective(&self, points: &[Vec<f64>], tol: f64) -> Result<f64> {
        let y = self.net_flow(points)?;
        let mut total = self.utility().value(&y[..self.instance.n()])?;
        for (i, p) in points.iter().enumerate() {
            if !self.cones[i].contains(p, tol) {
                return Ok(f64::NEG_INFINITY);
            }
            total += self.fee(i) * p[p.len() - 1];
        }
        Ok(total)
    }

    /// `(xᵢ, -1)` for original flows `xᵢ ∈ Tᵢ`.
    pub fn embed(&self, flows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        flows
            .iter()
            .map(|x| {
                let mut p = x.clone();
                p.push(-1.0);
                p
            })
            .collect()
    }

    /// Original flows from conic points via the dominating completion; the
    /// objective is preserved for fee-free instances and for `λᵢ = -1`.
    pub fn to_original(&self, points: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
        check_dim(self.m(), points.len())?;
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut full = self.cones[i].cone().dominating_completion(p, tol)?;
                full.pop();
                Ok(full)
            })
            .collect()
    }
}

/// Default tolerance for cone tests.
pub const CONE_TOL: f64 = DEFAULT_TOL;
