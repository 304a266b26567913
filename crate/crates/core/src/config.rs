//! Tunables of the agent flows. Every field has a default, so a config file
//! only needs the values it changes.

use serde::{Deserialize, Serialize};

use crate::dsp::{ActivityThresholds, GatingConfig};
use crate::llm::ModelParams;
use crate::router::{ClassifierRules, CostOptions, PriceTable, TierModels};
use crate::tools::NO_DATA_INTERVAL_S;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    /// Conversation turns in the prompt for reasoning and high-risk queries.
    pub history_turns: usize,
    /// Recent estimates in the prompt for reasoning and high-risk queries.
    pub metrics_window: usize,
    /// Smaller windows used with the minimal prompt for simple queries.
    pub simple_history_turns: usize,
    pub simple_metrics_window: usize,
    /// Knowledge passages added to detailed prompts.
    pub knowledge_k: usize,
    pub no_data_interval_s: i64,
    pub no_data_cron: String,
    /// Minimum spacing between two delivered urgent alerts for a user.
    pub alert_cooldown_s: i64,
    /// Extra model calls when a reply breaks the output schema.
    pub schema_retries: u32,
    pub models: TierModels,
    pub qc_model: String,
    pub agent_temperature: f64,
    pub agent_top_p: f64,
    pub interpreter: ModelParams,
    pub ppg_rate_hz: f64,
    pub gating: GatingConfig,
    pub activity: ActivityThresholds,
    pub classifier: ClassifierRules,
    pub prices: PriceTable,
    /// Price the classification pass too (only meaningful with a model router).
    pub include_router_overhead: bool,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            history_turns: 10,
            metrics_window: 90,
            simple_history_turns: 4,
            simple_metrics_window: 6,
            knowledge_k: 2,
            no_data_interval_s: NO_DATA_INTERVAL_S,
            no_data_cron: "0 * * * *".into(),
            alert_cooldown_s: 1800,
            schema_retries: 1,
            models: TierModels::default(),
            qc_model: "o1".into(),
            agent_temperature: 0.7,
            agent_top_p: 1.0,
            interpreter: ModelParams::interpreter(),
            ppg_rate_hz: 31.0,
            gating: GatingConfig::default(),
            activity: ActivityThresholds::default(),
            classifier: ClassifierRules::default(),
            prices: PriceTable::default(),
            include_router_overhead: false,
        }
    }
}

impl OrchestratorConfig {
    pub fn cost_options(&self) -> CostOptions {
        CostOptions {
            models: self.models.clone(),
            include_router_overhead: self.include_router_overhead,
            ..CostOptions::default()
        }
    }

    pub fn agent_params(&self, model: &str) -> ModelParams {
        ModelParams {
            model_name: model.to_owned(),
            temperature: self.agent_temperature,
            top_p: self.agent_top_p,
        }
    }
}
