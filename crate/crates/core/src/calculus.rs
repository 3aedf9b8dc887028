//! Composition rules that build new flow sets from existing ones.
//!
//! Every composed set is again closed, convex, downward closed and contains
//! the origin, and is exposed through the same [`FlowSet`] oracles. Composition
//! trees only store their children; no geometry is materialised.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sets::{any_negative, check_dim, le_tol, separation_contains, FlowSet, SetRef, Support};

/// Which rule produced a composed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionKind {
    Scaled,
    MatrixImage,
    Lifted,
    MinkowskiSum,
    Intersection,
    Aggregate,
}

/// `αT` for `α >= 0`. `0·T` is the nonpositive orthant (downward closure of `{0}`).
#[derive(Debug, Clone)]
pub struct Scaled {
    inner: SetRef,
    alpha: f64,
}

pub fn scale(set: SetRef, alpha: f64) -> Result<Scaled> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::NegativeScale(alpha));
    }
    Ok(Scaled { inner: set, alpha })
}

impl Scaled {
    pub fn kind(&self) -> CompositionKind {
        CompositionKind::Scaled
    }
}

impl FlowSet for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn upper_bound(&self) -> Vec<f64> {
        if self.alpha == 0.0 {
            return vec![0.0; self.dim()];
        }
        self.inner
            .upper_bound()
            .iter()
            .map(|b| b * self.alpha)
            .collect()
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        if self.alpha == 0.0 {
            return x.iter().all(|v| le_tol(*v, 0.0, tol));
        }
        let shrunk: Vec<f64> = x.iter().map(|v| v / self.alpha).collect();
        self.inner.contains(&shrunk, tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        if self.alpha == 0.0 {
            return Support::attained(0.0, vec![0.0; self.dim()]);
        }
        let s = self.inner.support_of(price);
        Support {
            value: self.alpha * s.value,
            maximizer: s
                .maximizer
                .map(|x| x.iter().map(|v| v * self.alpha).collect()),
        }
    }

    fn exact_support(&self) -> bool {
        self.inner.exact_support()
    }
}

/// `AT - ℝᵖ₊` for an elementwise nonnegative, injective `A`.
#[derive(Debug, Clone)]
pub struct MatrixImage {
    inner: SetRef,
    matrix: DMatrix<f64>,
    /// For each column, its unique nonzero row and coefficient, when every
    /// column has one nonzero and no row has two. Membership is exact then.
    monomial: Option<Vec<(usize, f64)>>,
}

pub fn nonneg_matrix_image(set: SetRef, matrix: DMatrix<f64>) -> Result<MatrixImage> {
    check_dim(set.dim(), matrix.ncols())?;
    for c in 0..matrix.ncols() {
        for r in 0..matrix.nrows() {
            let a = matrix[(r, c)];
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::NegativeEntry { row: r, col: c });
            }
        }
    }
    let cols = matrix.ncols();
    let rank = if matrix.nrows() < cols {
        matrix.nrows().min(numeric_rank(&matrix))
    } else {
        numeric_rank(&matrix)
    };
    if rank < cols {
        return Err(Error::RankDeficient { rank, cols });
    }
    let monomial = monomial_structure(&matrix);
    Ok(MatrixImage {
        inner: set,
        matrix,
        monomial,
    })
}

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    m.clone()
        .svd(false, false)
        .rank(1e-12 * scale * m.nrows().max(m.ncols()) as f64)
}

fn monomial_structure(m: &DMatrix<f64>) -> Option<Vec<(usize, f64)>> {
    let mut row_used = vec![false; m.nrows()];
    let mut out = Vec::with_capacity(m.ncols());
    for c in 0..m.ncols() {
        let nz: Vec<usize> = (0..m.nrows()).filter(|&r| m[(r, c)] != 0.0).collect();
        if nz.len() != 1 || row_used[nz[0]] {
            return None;
        }
        row_used[nz[0]] = true;
        out.push((nz[0], m[(nz[0], c)]));
    }
    Some(out)
}

impl MatrixImage {
    pub fn kind(&self) -> CompositionKind {
        CompositionKind::MatrixImage
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl FlowSet for MatrixImage {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn upper_bound(&self) -> Vec<f64> {
        let inner = self.inner.upper_bound();
        (0..self.matrix.nrows())
            .map(|r| {
                (0..self.matrix.ncols())
                    .filter(|&c| self.matrix[(r, c)] != 0.0)
                    .map(|c| self.matrix[(r, c)] * inner[c])
                    .sum()
            })
            .collect()
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        match &self.monomial {
            Some(cols) => {
                let mut covered = vec![false; x.len()];
                let pre: Vec<f64> = cols
                    .iter()
                    .map(|&(r, a)| {
                        covered[r] = true;
                        x[r] / a
                    })
                    .collect();
                let rest_ok = x
                    .iter()
                    .zip(&covered)
                    .all(|(v, c)| *c || le_tol(*v, 0.0, tol));
                rest_ok && self.inner.contains(&pre, tol)
            }
            None => separation_contains(self, x, tol),
        }
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let xi = nalgebra::DVector::from_column_slice(price);
        let pulled = self.matrix.tr_mul(&xi);
        let s = self.inner.support_of(pulled.as_slice());
        Support {
            value: s.value,
            maximizer: s.maximizer.map(|x| {
                let x = nalgebra::DVector::from_vec(x);
                (&self.matrix * x).as_slice().to_vec()
            }),
        }
    }

    fn exact_support(&self) -> bool {
        self.inner.exact_support()
    }
}

/// Selector lifting of a set into a larger node space: local coordinate `k`
/// becomes global coordinate `indices[k]`; other coordinates may only be
/// nonpositive.
#[derive(Debug, Clone)]
pub struct Lifted {
    inner: SetRef,
    indices: Vec<usize>,
    ambient: usize,
}

pub(crate) fn validate_indices(indices: &[usize], ambient: usize) -> Result<()> {
    let mut seen = vec![false; ambient];
    for &j in indices {
        if j >= ambient {
            return Err(Error::InvalidIndices(format!(
                "index {j} out of range for {ambient} nodes"
            )));
        }
        if seen[j] {
            return Err(Error::InvalidIndices(format!("index {j} repeated")));
        }
        seen[j] = true;
    }
    Ok(())
}

pub fn lift(set: SetRef, indices: Vec<usize>, ambient: usize) -> Result<Lifted> {
    check_dim(set.dim(), indices.len())?;
    validate_indices(&indices, ambient)?;
    Ok(Lifted {
        inner: set,
        indices,
        ambient,
    })
}

impl Lifted {
    pub fn kind(&self) -> CompositionKind {
        CompositionKind::Lifted
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn inner(&self) -> &SetRef {
        &self.inner
    }

    fn gather(&self, v: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&j| v[j]).collect()
    }

    fn scatter_into(&self, local: &[f64], out: &mut [f64]) {
        for (k, &j) in self.indices.iter().enumerate() {
            out[j] += local[k];
        }
    }
}

impl FlowSet for Lifted {
    fn dim(&self) -> usize {
        self.ambient
    }

    fn upper_bound(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient];
        for (k, b) in self.inner.upper_bound().into_iter().enumerate() {
            out[self.indices[k]] = b;
        }
        out
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        let mut selected = vec![false; self.ambient];
        self.indices.iter().for_each(|&j| selected[j] = true);
        let rest_ok = x
            .iter()
            .zip(&selected)
            .all(|(v, s)| *s || le_tol(*v, 0.0, tol));
        rest_ok && self.inner.contains(&self.gather(x), tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let s = self.inner.support_of(&self.gather(price));
        Support {
            value: s.value,
            maximizer: s.maximizer.map(|x| {
                let mut out = vec![0.0; self.ambient];
                self.scatter_into(&x, &mut out);
                out
            }),
        }
    }

    fn exact_support(&self) -> bool {
        self.inner.exact_support()
    }
}

fn bounded_above(set: &dyn FlowSet) -> bool {
    set.upper_bound().iter().all(|b| b.is_finite())
}

/// `T + T̃`. Both summands must be bounded from above.
#[derive(Debug, Clone)]
pub struct MinkowskiSum {
    a: SetRef,
    b: SetRef,
}

pub fn minkowski_sum(a: SetRef, b: SetRef) -> Result<MinkowskiSum> {
    check_dim(a.dim(), b.dim())?;
    if !bounded_above(a.as_ref()) || !bounded_above(b.as_ref()) {
        return Err(Error::UnboundedSummand);
    }
    Ok(MinkowskiSum { a, b })
}

impl MinkowskiSum {
    pub fn kind(&self) -> CompositionKind {
        CompositionKind::MinkowskiSum
    }
}

fn add_supports(a: Support, b: Support) -> Support {
    let maximizer = match (a.maximizer, b.maximizer) {
        (Some(x), Some(y)) => Some(x.iter().zip(&y).map(|(u, v)| u + v).collect()),
        _ => None,
    };
    Support {
        value: a.value + b.value,
        maximizer,
    }
}

impl FlowSet for MinkowskiSum {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn upper_bound(&self) -> Vec<f64> {
        let ua = self.a.upper_bound();
        self.b
            .upper_bound()
            .iter()
            .zip(&ua)
            .map(|(u, v)| u + v)
            .collect()
    }

    /// Sampled-direction separation test; see [`separation_contains`].
    fn contains(&self, x: &[f64], tol: f64) -> bool {
        separation_contains(self, x, tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        add_supports(self.a.support_of(price), self.b.support_of(price))
    }

    fn exact_support(&self) -> bool {
        self.a.exact_support() && self.b.exact_support()
    }
}

/// `T ∩ T̃`. Membership is exact; the support is an upper estimate from a
/// projected subgradient method on the split `f_T(ξ - ζ) + f_T̃(ζ)`.
#[derive(Debug, Clone)]
pub struct Intersection {
    a: SetRef,
    b: SetRef,
    iterations: usize,
}

pub fn intersection(a: SetRef, b: SetRef) -> Result<Intersection> {
    check_dim(a.dim(), b.dim())?;
    Ok(Intersection {
        a,
        b,
        iterations: 4000,
    })
}

impl Intersection {
    pub fn kind(&self) -> CompositionKind {
        CompositionKind::Intersection
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    fn split_value(&self, price: &[f64], zeta: &[f64]) -> (f64, Option<Vec<f64>>) {
        let rest: Vec<f64> = price
            .iter()
            .zip(zeta)
            .map(|(p, z)| (p - z).max(0.0))
            .collect();
        let sa = self.a.support_of(&rest);
        let sb = self.b.support_of(zeta);
        let sub = match (sa.maximizer, sb.maximizer) {
            (Some(xa), Some(xb)) => Some(xb.iter().zip(&xa).map(|(u, v)| u - v).collect()),
            _ => None,
        };
        (sa.value + sb.value, sub)
    }
}

impl FlowSet for Intersection {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn upper_bound(&self) -> Vec<f64> {
        let ua = self.a.upper_bound();
        self.b
            .upper_bound()
            .iter()
            .zip(&ua)
            .map(|(u, v)| u.min(*v))
            .collect()
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.a.contains(x, tol) && self.b.contains(x, tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let d = price.len();
        let zero = vec![0.0; d];
        let (mut best, _) = self.split_value(price, &zero);
        let (at_full, _) = self.split_value(price, price);
        best = best.min(at_full);
        let radius = price.iter().fold(0.0f64, |m, p| m.max(*p));
        if radius == 0.0 {
            return Support::unattained(best.max(0.0));
        }
        let mut zeta: Vec<f64> = price.iter().map(|p| 0.5 * p).collect();
        for k in 0..self.iterations {
            let (value, sub) = self.split_value(price, &zeta);
            best = best.min(value);
            let Some(sub) = sub else { break };
            let norm = sub.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let step = radius / (norm * ((k + 1) as f64).sqrt());
            for j in 0..d {
                zeta[j] = (zeta[j] - step * sub[j]).clamp(0.0, price[j]);
            }
        }
        Support::unattained(best)
    }

    fn exact_support(&self) -> bool {
        false
    }
}

/// `Σᵢ (AᵢTᵢ - ℝ₊)`: the single edge equivalent to a whole network when edge
/// utilities vanish.
#[derive(Debug, Clone)]
pub struct Aggregate {
    parts: Vec<Lifted>,
    ambient: usize,
}

pub fn aggregate(edges: Vec<(SetRef, Vec<usize>)>, ambient: usize) -> Result<Aggregate> {
    let mut parts = Vec::with_capacity(edges.len());
    for (set, indices) in edges {
        if !bounded_above(set.as_ref()) {
            return Err(Error::UnboundedSummand);
        }
        parts.push(lift(set, indices, ambient)?);
    }
    Ok(Aggregate { parts, ambient })
}

impl Aggregate {
    pub fn kind(&self) -> CompositionKind {
        CompositionKind::Aggregate
    }

    pub fn parts(&self) -> &[Lifted] {
        &self.parts
    }
}

impl FlowSet for Aggregate {
    fn dim(&self) -> usize {
        self.ambient
    }

    fn upper_bound(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient];
        for p in &self.parts {
            for (o, b) in out.iter_mut().zip(p.upper_bound()) {
                *o += b;
            }
        }
        out
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        separation_contains(self, x, tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let mut total = Support::attained(0.0, vec![0.0; self.ambient]);
        for p in &self.parts {
            total = add_supports(total, p.support_of(price));
        }
        total
    }

    fn exact_support(&self) -> bool {
        self.parts.iter().all(|p| p.exact_support())
    }
}

/// Wraps a composed set into a shared handle.
pub fn shared<S: FlowSet + 'static>(set: S) -> SetRef {
    Arc::new(set)
}
