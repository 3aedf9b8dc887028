//! Evaluation-only view of the dual conic flow problem.

use super::{Instance, Utility};
use crate::conic::FlowCone;
use crate::error::Result;

/// Packages node degrees, per-edge flow cones and the utility conjugate.
///
/// A dual point is a node price vector `ν` together with per-edge polar pairs
/// `ηᵢ = (Aᵢᵀν, tᵢ) ∈ Kᵢ°`; the dual objective is `Ū(ν) + Σ max(tᵢ - qᵢ, 0)`.
#[derive(Debug, Clone)]
pub struct DualInstanceView<'a> {
    instance: &'a Instance,
    degree: Vec<f64>,
    cones: Vec<FlowCone>,
}

/// Builds the view; every node must be incident to an edge.
pub fn build_dual_view(instance: &Instance) -> Result<DualInstanceView<'_>> {
    let degree = instance.degree_matrix(true)?;
    let cones = instance
        .edges()
        .iter()
        .map(|e| FlowCone::new(e.set().clone()))
        .collect();
    Ok(DualInstanceView {
        instance,
        degree,
        cones,
    })
}

impl<'a> DualInstanceView<'a> {
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn cone(&self, i: usize) -> &FlowCone {
        &self.cones[i]
    }

    pub fn utility(&self) -> &Utility {
        self.instance.utility()
    }

    /// Edge prices `ξᵢ = Aᵢᵀν`.
    pub fn pulled_prices(&self, nu: &[f64]) -> Vec<Vec<f64>> {
        self.instance.edges().iter().map(|e| e.pull(nu)).collect()
    }

    /// `D⁻¹ Σ Aᵢξᵢ`: the node prices that best agree with per-edge prices.
    /// Exactly recovers `ν` when `ξᵢ = Aᵢᵀν`.
    pub fn consensus_prices(&self, edge_prices: &[Vec<f64>]) -> Vec<f64> {
        let mut nu = vec![0.0; self.instance.n()];
        for (e, xi) in self.instance.edges().iter().zip(edge_prices) {
            e.scatter(xi, &mut nu);
        }
        nu.iter_mut().zip(&self.degree).for_each(|(v, d)| *v /= d);
        nu
    }

    /// Dual objective at `ν` with edge epigraph values `tᵢ`; `+∞` if some
    /// `(Aᵢᵀν, tᵢ)` is not in the polar cone or `ν` is outside `dom Ū`.
    pub fn objective(&self, nu: &[f64], t: &[f64], tol: f64) -> Result<f64> {
        let mut total = self.utility().conjugate(nu)?.value;
        for ((e, cone), ti) in self.instance.edges().iter().zip(&self.cones).zip(t) {
            let mut eta = e.pull(nu);
            eta.push(*ti);
            if !cone.polar_membership(&eta, tol)? {
                return Ok(f64::INFINITY);
            }
            total += (ti - e.fee()).max(0.0);
        }
        Ok(total)
    }

    /// Smallest `tᵢ` with `(Aᵢᵀν, tᵢ) ∈ Kᵢ°`, found by bisection on polar
    /// membership alone (an independent route to `fᵢ(Aᵢᵀν)`).
    pub fn min_edge_terms(&self, nu: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.cones.len());
        for (e, cone) in self.instance.edges().iter().zip(&self.cones) {
            let mut eta = e.pull(nu);
            eta.push(0.0);
            let last = eta.len() - 1;
            let mut member = |t: f64| -> Result<bool> {
                eta[last] = t;
                cone.polar_membership(&eta, 0.0)
            };
            if member(0.0)? {
                out.push(0.0);
                continue;
            }
            let mut hi = 1.0;
            while !member(hi)? {
                hi *= 2.0;
                if hi > 1e300 {
                    break;
                }
            }
            if hi > 1e300 {
                out.push(f64::INFINITY);
                continue;
            }
            let mut lo = 0.0;
            while hi - lo > tol * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if member(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(hi);
        }
        Ok(out)
    }

    /// Dual objective with the edge terms minimized, i.e. the dual function.
    pub fn dual_value(&self, nu: &[f64], tol: f64) -> Result<f64> {
        let t = self.min_edge_terms(nu, tol)?;
        self.objective(nu, &t, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Edge;
    use crate::sets::{CappedConcaveEdge, ProductMarketEdge, SetRef};
    use std::sync::Arc;

    #[test]
    fn single_edge_view() {
        let set: SetRef = Arc::new(CappedConcaveEdge::rational(1.0).unwrap());
        let inst = Instance::new(
            2,
            vec![Edge::free(set, vec![0, 1]).unwrap()],
            Utility::linear(vec![1.0, 4.0]),
        )
        .unwrap();
        let view = build_dual_view(&inst).unwrap();
        assert_eq!(view.degree(), &[1.0, 1.0]);
        let g = view.dual_value(&[1.0, 4.0], 1e-12).unwrap();
        assert!((g - 1.0).abs() < 1e-10);
        assert_eq!(
            view.objective(&[1.0, 4.0], &[0.5], 1e-9).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn consensus_recovers_prices() {
        let m: SetRef = Arc::new(ProductMarketEdge::new(1.0, 2.0).unwrap());
        let inst = Instance::new(
            3,
            vec![
                Edge::free(m.clone(), vec![0, 1]).unwrap(),
                Edge::free(m, vec![1, 2]).unwrap(),
            ],
            Utility::quadratic(vec![1.0; 3], 1.0),
        )
        .unwrap();
        let view = build_dual_view(&inst).unwrap();
        let nu = [0.3, 1.7, 0.9];
        assert_eq!(view.consensus_prices(&view.pulled_prices(&nu)), nu.to_vec());
    }
}
