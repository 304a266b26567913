//! Tiered model selection and input-token cost accounting.
//!
//! `TotalCost(q) = sum over models m used for q of Tokens_m(q) / 1000 * Price_m`,
//! with token counts approximated as `ceil(chars / 4)`.

mod classify;
mod cost;

pub use classify::{ClassifierRules, HeuristicClassifier, ModelClassifier, QueryClassifier};
pub use cost::{
    baseline_cost, cost, cost_study, estimate_tokens, CostOptions, CostRecord, CostStudy,
    PriceTable, QueryCost,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RouterError {
    #[error("no price for model `{0}`")]
    UnknownModel(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid price for `{model}`: {price}")]
    InvalidPrice { model: String, price: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Simple,
    Reasoning,
    HighRisk,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Simple => "simple",
            Tier::Reasoning => "reasoning",
            Tier::HighRisk => "high_risk",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "simple" => Ok(Tier::Simple),
            "reasoning" => Ok(Tier::Reasoning),
            "high_risk" | "highrisk" | "complex" => Ok(Tier::HighRisk),
            other => Err(format!("unknown tier {other:?}")),
        }
    }
}

/// Model bound to each tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierModels {
    pub simple: String,
    pub reasoning: String,
    pub high_risk: String,
}

impl Default for TierModels {
    fn default() -> Self {
        TierModels {
            simple: "gpt-4o-mini".into(),
            reasoning: "o3-mini".into(),
            high_risk: "o1".into(),
        }
    }
}

impl TierModels {
    pub fn model(&self, tier: Tier) -> &str {
        match tier {
            Tier::Simple => &self.simple,
            Tier::Reasoning => &self.reasoning,
            Tier::HighRisk => &self.high_risk,
        }
    }
}
