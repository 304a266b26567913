use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::tools::{ChartKind, Metric};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("reply does not match the output schema: {0}")]
pub struct SchemaViolation(pub String);

pub const OUTPUT_KEYS: [&str; 5] = ["PERSONAL", "IMAGE", "URGENCY", "RESPONSES", "QUESTIONS"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Urgency {
    Urgent,
    NotUrgent,
}

fn default_hours() -> f64 {
    24.0
}

fn default_kind() -> ChartKind {
    ChartKind::Line
}

/// Chart the model asks for; the user and the absolute range are filled in
/// by the orchestrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRequest {
    pub metric: Metric,
    #[serde(default = "default_kind")]
    pub kind: ChartKind,
    /// Look-back window ending now.
    #[serde(default = "default_hours")]
    pub hours: f64,
}

/// Structured agent reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOutput {
    /// `false`/`true`, or a short note about what personal data was used.
    #[serde(rename = "PERSONAL")]
    pub personal: Value,
    #[serde(rename = "IMAGE")]
    pub image: Option<ImageRequest>,
    #[serde(rename = "URGENCY")]
    pub urgency: Urgency,
    #[serde(rename = "RESPONSES")]
    pub responses: Vec<String>,
    #[serde(rename = "QUESTIONS")]
    pub questions: Vec<String>,
}

impl AgentOutput {
    /// A plain reply with no image or suggestions.
    pub fn text<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AgentOutput {
            personal: Value::Bool(false),
            image: None,
            urgency: Urgency::NotUrgent,
            responses: responses.into_iter().map(Into::into).collect(),
            questions: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("AgentOutput serializes")
    }
}

/// Text inside a ```json fence if present, otherwise the trimmed input.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

/// Strict parse: a single JSON object with exactly the five keys, correct
/// types, and at least one response.
pub fn enforce_schema(model_text: &str) -> Result<AgentOutput, SchemaViolation> {
    let v = |m: String| SchemaViolation(m);
    let obj: Map<String, Value> =
        serde_json::from_str(unfence(model_text)).map_err(|e| v(format!("not a JSON object: {e}")))?;
    for key in OUTPUT_KEYS {
        if !obj.contains_key(key) {
            return Err(v(format!("missing field {key}")));
        }
    }
    let out: AgentOutput = serde_json::from_value(Value::Object(obj)).map_err(|e| v(e.to_string()))?;
    if !matches!(out.personal, Value::Bool(_) | Value::String(_)) {
        return Err(v("PERSONAL must be a boolean or a string".into()));
    }
    if out.responses.is_empty() || out.responses.iter().all(|r| r.trim().is_empty()) {
        return Err(v("RESPONSES must contain at least one message".into()));
    }
    if let Some(img) = &out.image {
        if !(img.hours.is_finite() && img.hours > 0.0) {
            return Err(v("IMAGE.hours must be positive".into()));
        }
    }
    Ok(out)
}

/// Schema description embedded in every agent prompt.
pub const OUTPUT_SCHEMA_SPEC: &str = r#"Reply with one JSON object and nothing else. It must have exactly these keys:
  "PERSONAL": true if the reply uses the user's personal data, else false (or a short string naming what was used)
  "IMAGE": null, or {"metric": "hr"|"spo2"|"temp_body"|"temp_ambient"|"activity", "kind": "line"|"histogram", "hours": number} to attach a chart
  "URGENCY": "urgent" or "not_urgent"
  "RESPONSES": non-empty list of short chat messages, sent in order
  "QUESTIONS": list of up to 3 short follow-up questions the user can tap (may be empty)"#;
