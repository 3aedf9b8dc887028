//! Canonical JSON documents for instances.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Edge, Instance, Utility};
use crate::error::{Error, Result};
use crate::sets::SetSpec;

pub const DOCUMENT_VERSION: u32 = 1;

/// Versioned, language-neutral instance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub version: u32,
    pub n: usize,
    pub utility: Utility,
    pub edges: Vec<EdgeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub kind: String,
    pub params: Value,
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub fee: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<Vec<f64>>,
}

impl InstanceDocument {
    /// Parses a document, checking the version before the rest of the schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let found = raw
            .get("version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Schema("missing integer field `version`".into()))?;
        if found != DOCUMENT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found as u32,
                expected: DOCUMENT_VERSION,
            });
        }
        serde_json::from_value(raw).map_err(|e| Error::Schema(e.to_string()))
    }

    /// Canonical text form: pretty-printed with fixed field order and
    /// shortest round-trip decimal doubles.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize to JSON")
    }
}

impl Instance {
    pub fn to_document(&self) -> Result<InstanceDocument> {
        let mut edges = Vec::with_capacity(self.m());
        for (i, e) in self.edges().iter().enumerate() {
            let spec = e.set().spec().ok_or(Error::NotSerializable(i))?;
            edges.push(EdgeDocument {
                kind: spec.kind().to_string(),
                params: spec.params(),
                nodes: e.nodes().to_vec(),
                fee: e.fee(),
                utility: e.utility().map(|w| w.to_vec()),
            });
        }
        Ok(InstanceDocument {
            version: DOCUMENT_VERSION,
            n: self.n(),
            utility: self.utility().clone(),
            edges,
        })
    }

    pub fn from_document(doc: &InstanceDocument) -> Result<Self> {
        if doc.version != DOCUMENT_VERSION {
            return Err(Error::VersionMismatch {
                found: doc.version,
                expected: DOCUMENT_VERSION,
            });
        }
        let mut edges = Vec::with_capacity(doc.edges.len());
        for (i, e) in doc.edges.iter().enumerate() {
            if !(e.fee >= 0.0 && e.fee.is_finite()) {
                return Err(Error::NegativeFee {
                    edge: i,
                    fee: e.fee,
                });
            }
            let set = SetSpec::from_parts(&e.kind, e.params.clone())?.build()?;
            let mut edge = Edge::new(set, e.nodes.clone(), e.fee).map_err(|err| match err {
                Error::DimensionMismatch { expected, got } => Error::Schema(format!(
                    "edge {i}: set has dimension {expected} but {got} nodes are listed"
                )),
                other => other,
            })?;
            if let Some(w) = &e.utility {
                edge = edge.with_utility(w.clone())?;
            }
            edges.push(edge);
        }
        Instance::new(doc.n, edges, doc.utility.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(self.to_document()?.to_json())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&InstanceDocument::from_json(text)?)
    }
}
