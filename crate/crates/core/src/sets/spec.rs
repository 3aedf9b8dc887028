use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    CappedConcaveEdge, Gain, HalfLineEdge, LinearTickEdge, PiecewiseLinearGain, ProductMarketEdge,
    SetRef,
};
use crate::error::{Error, Result};

/// Serializable description of a built-in flow set.
#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    CappedConcave { capacity: f64, gain: GainSpec },
    LinearTick { price: f64, cap: f64 },
    ProductMarket { reserves: [f64; 2] },
    HalfLine { cap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainSpec {
    Rational,
    Tabulated {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CappedParams {
    capacity: f64,
    gain: GainSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TickParams {
    price: f64,
    cap: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketParams {
    reserves: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfLineParams {
    cap: f64,
}

fn parse<T: for<'de> Deserialize<'de>>(kind: &str, params: Value) -> Result<T> {
    serde_json::from_value(params).map_err(|e| Error::Schema(format!("{kind} params: {e}")))
}

fn to_value<T: Serialize>(params: T) -> Value {
    serde_json::to_value(params).expect("set parameters serialize to JSON")
}

impl SetSpec {
    pub const KINDS: [&'static str; 4] = [
        "capped_concave",
        "linear_tick",
        "product_market",
        "half_line",
    ];

    pub fn kind(&self) -> &'static str {
        match self {
            SetSpec::CappedConcave { .. } => "capped_concave",
            SetSpec::LinearTick { .. } => "linear_tick",
            SetSpec::ProductMarket { .. } => "product_market",
            SetSpec::HalfLine { .. } => "half_line",
        }
    }

    pub fn from_parts(kind: &str, params: Value) -> Result<Self> {
        match kind {
            "capped_concave" => {
                let p: CappedParams = parse(kind, params)?;
                Ok(SetSpec::CappedConcave {
                    capacity: p.capacity,
                    gain: p.gain,
                })
            }
            "linear_tick" => {
                let p: TickParams = parse(kind, params)?;
                Ok(SetSpec::LinearTick {
                    price: p.price,
                    cap: p.cap,
                })
            }
            "product_market" => {
                let p: MarketParams = parse(kind, params)?;
                Ok(SetSpec::ProductMarket {
                    reserves: p.reserves,
                })
            }
            "half_line" => {
                let p: HalfLineParams = parse(kind, params)?;
                Ok(SetSpec::HalfLine { cap: p.cap })
            }
            other => Err(Error::UnknownSetKind(other.to_string())),
        }
    }

    pub fn params(&self) -> Value {
        match self {
            SetSpec::CappedConcave { capacity, gain } => to_value(CappedParams {
                capacity: *capacity,
                gain: gain.clone(),
            }),
            SetSpec::LinearTick { price, cap } => to_value(TickParams {
                price: *price,
                cap: *cap,
            }),
            SetSpec::ProductMarket { reserves } => to_value(MarketParams {
                reserves: *reserves,
            }),
            SetSpec::HalfLine { cap } => to_value(HalfLineParams { cap: *cap }),
        }
    }

    pub fn build(&self) -> Result<SetRef> {
        Ok(match self {
            SetSpec::CappedConcave { capacity, gain } => {
                let gain = match gain {
                    GainSpec::Rational => Gain::Rational,
                    GainSpec::Tabulated {
                        breakpoints,
                        slopes,
                    } => Gain::Tabulated(PiecewiseLinearGain::new(
                        breakpoints.clone(),
                        slopes.clone(),
                    )?),
                };
                Arc::new(CappedConcaveEdge::new(gain, *capacity)?)
            }
            SetSpec::LinearTick { price, cap } => Arc::new(LinearTickEdge::new(*price, *cap)?),
            SetSpec::ProductMarket { reserves } => {
                Arc::new(ProductMarketEdge::new(reserves[0], reserves[1])?)
            }
            SetSpec::HalfLine { cap } => Arc::new(HalfLineEdge::new(*cap)?),
        })
    }
}
