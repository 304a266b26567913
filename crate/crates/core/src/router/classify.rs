use serde::{Deserialize, Serialize};

use super::{estimate_tokens, Tier};
use crate::llm::{ModelClient, ModelParams};

pub trait QueryClassifier: Send + Sync {
    fn classify(&self, query: &str) -> Tier;
}

/// Vocabulary of the default keyword classifier. Single words match whole
/// words; multi-word entries match as phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierRules {
    pub high_risk_terms: Vec<String>,
    pub reasoning_terms: Vec<String>,
    /// Queries with no vocabulary match but at least this many tokens carry
    /// enough context to need the reasoning tier.
    pub long_query_tokens: u64,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl Default for ClassifierRules {
    fn default() -> Self {
        ClassifierRules {
            high_risk_terms: words(&[
                "chest pain", "pain", "dizzy", "dizziness", "faint", "fainted", "fainting",
                "short of breath", "breathless", "can't breathe", "cannot breathe", "palpitations",
                "palpitation", "irregular", "emergency", "urgent", "dropped", "dropping",
                "collapse", "collapsed", "numb", "numbness", "fever", "feverish", "anomaly",
                "abnormal", "alarming", "racing", "pounding", "confused", "unconscious",
                "bleeding", "seizure", "low oxygen", "too high", "too low",
            ]),
            reasoning_terms: words(&[
                "summarize", "summarise", "summary", "trend", "trends", "trending", "compare",
                "comparison", "week", "weekly", "month", "monthly", "over time", "average",
                "pattern", "patterns", "why", "explain", "analyze", "analyse", "analysis",
                "insight", "insights", "progress", "improve", "improving", "correlate",
                "correlation", "history", "plan", "recommend", "advice", "since",
            ]),
            long_query_tokens: 60,
        }
    }
}

/// Deterministic keyword/length classifier. Priority: high-risk, then
/// reasoning, then simple.
#[derive(Debug, Clone, Default)]
pub struct HeuristicClassifier {
    pub rules: ClassifierRules,
}

impl HeuristicClassifier {
    pub fn new(rules: ClassifierRules) -> Self {
        HeuristicClassifier { rules }
    }

    fn normalized(query: &str) -> String {
        let mut s = String::with_capacity(query.len() + 2);
        s.push(' ');
        for w in query
            .to_lowercase()
            .split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .filter(|w| !w.is_empty())
        {
            s.push_str(w);
            s.push(' ');
        }
        s
    }

    fn matches(haystack: &str, terms: &[String]) -> bool {
        terms.iter().any(|t| {
            let needle = format!(" {} ", t.trim().to_lowercase());
            haystack.contains(&needle)
        })
    }
}

impl QueryClassifier for HeuristicClassifier {
    fn classify(&self, query: &str) -> Tier {
        let norm = Self::normalized(query);
        if Self::matches(&norm, &self.rules.high_risk_terms) {
            Tier::HighRisk
        } else if Self::matches(&norm, &self.rules.reasoning_terms)
            || estimate_tokens(query) >= self.rules.long_query_tokens
        {
            Tier::Reasoning
        } else {
            // greetings, short messages and plain data requests
            Tier::Simple
        }
    }
}

/// Asks a model for the tier; falls back to the heuristic when the reply is
/// unusable or the client fails.
pub struct ModelClassifier<C> {
    pub client: C,
    pub params: ModelParams,
    pub fallback: HeuristicClassifier,
}

impl<C: ModelClient> ModelClassifier<C> {
    pub fn new(client: C, params: ModelParams) -> Self {
        ModelClassifier {
            client,
            params,
            fallback: HeuristicClassifier::default(),
        }
    }

    pub fn prompt(query: &str) -> String {
        format!(
            "Classify the user's message by the capability needed to answer it.\n\
             simple: greetings or basic data requests.\n\
             reasoning: summaries, trends or multi-step thought.\n\
             high_risk: potentially urgent anomalies, symptoms or complex context.\n\
             Answer with exactly one word: simple, reasoning or high_risk.\n\n\
             Message: {}",
            serde_json::Value::from(query)
        )
    }
}

impl<C: ModelClient> QueryClassifier for ModelClassifier<C> {
    fn classify(&self, query: &str) -> Tier {
        self.client
            .complete(&Self::prompt(query), &self.params)
            .ok()
            .and_then(|r| r.trim().trim_matches(|c: char| !c.is_alphanumeric() && c != '_').parse().ok())
            .unwrap_or_else(|| self.fallback.classify(query))
    }
}
