use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::Status;

/// Outcome of a dual solve plus primal recovery.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// `d* = g(ν)` at the final prices: an upper bound on the relaxation.
    pub dual_value: f64,
    /// `p_h = U(ŷ) + Σ qᵢλᵢ` of the recovered feasible point.
    pub primal_value: f64,
    pub abs_gap: f64,
    /// `(d* - p_h) / (1 + |d*|)`.
    pub rel_gap: f64,
    pub nu: Vec<f64>,
    pub flows: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub y_hat: Vec<f64>,
    /// Edge terms `max(fᵢ - qᵢ, 0)` at the final prices.
    pub edge_values: Vec<f64>,
    pub tied: Vec<bool>,
    pub tie_count: usize,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<f64>,
    pub runtime: Duration,
}

/// What a report proves about the true optimum.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Primal and dual values agree to tolerance.
    Optimal,
    /// The optimum lies in `[lower, upper]`.
    GapCertified { lower: f64, upper: f64 },
    /// No finite bracket (e.g. no feasible primal point was recovered).
    Unknown,
}

/// `Optimal` when `d* - p_h <= tol·(1 + |d*|)`, otherwise the bracket.
pub fn verify_optimality(report: &SolveReport, tol: f64) -> Certificate {
    let (d, p) = (report.dual_value, report.primal_value);
    if !d.is_finite() || !p.is_finite() {
        return Certificate::Unknown;
    }
    if d - p <= tol * (1.0 + d.abs()) {
        Certificate::Optimal
    } else {
        Certificate::GapCertified { lower: p, upper: d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSolution {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub value: f64,
    pub tied: bool,
}

/// Serialized solution. Non-finite objective values are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub objective_dual: Option<f64>,
    pub objective_primal: Option<f64>,
    pub gap: Option<f64>,
    pub nu: Vec<f64>,
    pub edges: Vec<EdgeSolution>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl SolutionDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solutions serialize to JSON")
    }
}

impl From<&SolveReport> for SolutionDocument {
    fn from(r: &SolveReport) -> Self {
        Self {
            objective_dual: finite(r.dual_value),
            objective_primal: finite(r.primal_value),
            gap: finite(r.abs_gap),
            nu: r.nu.clone(),
            edges: r
                .flows
                .iter()
                .enumerate()
                .map(|(i, x)| EdgeSolution {
                    x: x.clone(),
                    lambda: r.lambdas[i],
                    value: r.edge_values[i],
                    tied: r.tied[i],
                })
                .collect(),
        }
    }
}
