//! Problem instances: nodes, edges with selector index lists and fixed fees,
//! and the network utility.

mod document;
mod dual;
mod utility;

pub use document::{EdgeDocument, InstanceDocument, DOCUMENT_VERSION};
pub use dual::{build_dual_view, DualInstanceView};
pub use utility::{Conjugate, Utility};

use crate::calculus::validate_indices;
use crate::error::{Error, Result};
use crate::sets::{check_dim, SetRef};

/// One edge: an allowable flow set, the global nodes its local coordinates
/// map to, and a fixed fee charged when the edge carries flow.
#[derive(Debug, Clone)]
pub struct Edge {
    set: SetRef,
    nodes: Vec<usize>,
    fee: f64,
    utility: Option<Vec<f64>>,
}

impl Edge {
    pub fn new(set: SetRef, nodes: Vec<usize>, fee: f64) -> Result<Self> {
        check_dim(set.dim(), nodes.len())?;
        if !(fee >= 0.0 && fee.is_finite()) {
            return Err(Error::NegativeFee { edge: 0, fee });
        }
        Ok(Self {
            set,
            nodes,
            fee,
            utility: None,
        })
    }

    /// Fee-free edge.
    pub fn free(set: SetRef, nodes: Vec<usize>) -> Result<Self> {
        Self::new(set, nodes, 0.0)
    }

    /// Attaches a linear edge utility `Vᵢ(x) = vᵀx`. The dual solver only
    /// accepts edges whose weights are all zero.
    pub fn with_utility(mut self, weights: Vec<f64>) -> Result<Self> {
        check_dim(self.nodes.len(), weights.len())?;
        self.utility = Some(weights);
        Ok(self)
    }

    pub fn set(&self) -> &SetRef {
        &self.set
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn fee(&self) -> f64 {
        self.fee
    }

    pub fn utility(&self) -> Option<&[f64]> {
        self.utility.as_deref()
    }

    pub fn has_edge_utility(&self) -> bool {
        self.utility
            .as_ref()
            .is_some_and(|w| w.iter().any(|v| *v != 0.0))
    }

    pub fn with_fee(&self, fee: f64) -> Self {
        Self {
            fee,
            ..self.clone()
        }
    }

    /// `Aᵢᵀν`: the prices seen by this edge.
    pub fn pull(&self, nu: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&j| nu[j]).collect()
    }

    /// `out += Aᵢ x`.
    pub fn scatter(&self, x: &[f64], out: &mut [f64]) {
        for (k, &j) in self.nodes.iter().enumerate() {
            out[j] += x[k];
        }
    }
}

/// A network flow problem: `maximize U(y) + Σ qᵢλᵢ` over
/// `y = Σ Aᵢxᵢ`, `(xᵢ, λᵢ) ∈ {0} ∪ (Tᵢ × {-1})`. With all fees zero this is
/// the plain convex flow problem.
#[derive(Debug, Clone)]
pub struct Instance {
    n: usize,
    edges: Vec<Edge>,
    utility: Utility,
}

impl Instance {
    pub fn new(n: usize, edges: Vec<Edge>, utility: Utility) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "instance needs at least one node".into(),
            ));
        }
        utility.validate(n)?;
        for (i, e) in edges.iter().enumerate() {
            validate_indices(&e.nodes, n).map_err(|err| match err {
                Error::InvalidIndices(msg) => Error::InvalidIndices(format!("edge {i}: {msg}")),
                other => other,
            })?;
            if !(e.fee >= 0.0 && e.fee.is_finite()) {
                return Err(Error::NegativeFee {
                    edge: i,
                    fee: e.fee,
                });
            }
        }
        Ok(Self { n, edges, utility })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn utility(&self) -> &Utility {
        &self.utility
    }

    pub fn fees(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.fee).collect()
    }

    pub fn max_fee(&self) -> f64 {
        self.edges.iter().fold(0.0, |acc, e| acc.max(e.fee))
    }

    /// Same network with every fee set to zero.
    pub fn without_fees(&self) -> Self {
        Self {
            n: self.n,
            edges: self.edges.iter().map(|e| e.with_fee(0.0)).collect(),
            utility: self.utility.clone(),
        }
    }

    /// Same nodes and utility, keeping only the listed edges (fees kept).
    pub fn restricted(&self, keep: &[usize]) -> Self {
        Self {
            n: self.n,
            edges: keep.iter().map(|&i| self.edges[i].clone()).collect(),
            utility: self.utility.clone(),
        }
    }

    pub fn with_utility(&self, utility: Utility) -> Result<Self> {
        Self::new(self.n, self.edges.clone(), utility)
    }

    /// `y = Σ Aᵢxᵢ`.
    pub fn net_flow(&self, flows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_dim(self.edges.len(), flows.len())?;
        let mut y = vec![0.0; self.n];
        for (e, x) in self.edges.iter().zip(flows) {
            check_dim(e.nodes.len(), x.len())?;
            e.scatter(x, &mut y);
        }
        Ok(y)
    }

    /// Diagonal of `D = Σ AᵢAᵢᵀ` (node degrees). In strict mode a node with
    /// degree 0 is an error.
    pub fn degree_matrix(&self, strict: bool) -> Result<Vec<f64>> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            for &j in &e.nodes {
                d[j] += 1.0;
            }
        }
        if strict {
            if let Some(j) = d.iter().position(|v| *v == 0.0) {
                return Err(Error::IsolatedNode(j));
            }
        }
        Ok(d)
    }

    /// Checks the restrictions of the dual solver: zero edge utilities.
    pub fn check_solvable(&self) -> Result<()> {
        match self.edges.iter().position(|e| e.has_edge_utility()) {
            Some(i) => Err(Error::NonzeroEdgeUtility(i)),
            None => Ok(()),
        }
    }

    /// Objective `U(y) + Σ qᵢλᵢ` of a primal point given as flows and
    /// activations (no feasibility check).
    pub fn objective(&self, flows: &[Vec<f64>], lambdas: &[f64]) -> Result<f64> {
        check_dim(self.edges.len(), lambdas.len())?;
        let y = self.net_flow(flows)?;
        let fees: f64 = self.edges.iter().zip(lambdas).map(|(e, l)| e.fee * l).sum();
        let edge_utility: f64 = self
            .edges
            .iter()
            .zip(flows)
            .filter_map(|(e, x)| e.utility.as_ref().map(|w| crate::sets::dot(w, x)))
            .sum();
        Ok(self.utility.value(&y)? + edge_utility + fees)
    }
}
