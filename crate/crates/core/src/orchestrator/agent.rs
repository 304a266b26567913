//! Offline stand-ins for the hosted agent model and the speech transcriber,
//! plus parsers for the small JSON replies of the QC and extraction tasks.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::context::{MESSAGE_PREFIX, SECTION_MARKERS, TASK_PREFIX};
use super::schema::{AgentOutput, ImageRequest, Urgency};
use crate::delivery::MediaObject;
use crate::llm::{ClientError, ModelClient, ModelParams};
use crate::tools::{ChartKind, Metric};

pub const TASK_USER_MESSAGE: &str = "user_message";
pub const TASK_DAILY_SUMMARY: &str = "daily_summary";
pub const TASK_QC_REVIEW: &str = "qc_review";
pub const TASK_SIGNUP_EXTRACT: &str = "signup_extract";

/// The value after `prefix` on the first line that starts with it.
pub fn prompt_line<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

fn section<'a>(prompt: &'a str, marker: &str) -> Vec<&'a str> {
    let Some(start) = prompt.find(marker) else {
        return Vec::new();
    };
    prompt[start + marker.len()..]
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with("### "))
        .filter(|l| !l.trim().is_empty())
        .collect()
}

fn field(line: &str, key: &str) -> Option<f64> {
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(key))
        .and_then(|v| v.parse().ok())
}

/// Deterministic agent used offline and in tests. Dispatches on the task
/// line of the prompt and always answers in the expected format.
#[derive(Debug, Clone, Default)]
pub struct OfflineAgentClient;

impl OfflineAgentClient {
    fn chat(&self, prompt: &str, summary: bool) -> AgentOutput {
        let message = prompt_line(prompt, MESSAGE_PREFIX).unwrap_or("").to_lowercase();
        let readings: Vec<&str> = section(prompt, SECTION_MARKERS[2])
            .into_iter()
            .filter(|l| l.starts_with('['))
            .collect();
        let name = section(prompt, SECTION_MARKERS[3])
            .into_iter()
            .find_map(|l| l.strip_prefix("name: "))
            .filter(|n| *n != "unknown")
            .map(|n| format!(" {n}"))
            .unwrap_or_default();
        let wants_chart = ["chart", "graph", "plot"].iter().any(|w| message.contains(w));
        let greeting = ["hi", "hello", "hey"]
            .iter()
            .any(|g| message.split(|c: char| !c.is_alphanumeric()).any(|w| w == *g));

        let mut responses = Vec::new();
        if summary || message.contains("summar") {
            let hrs: Vec<f64> = readings.iter().filter_map(|l| field(l, "hr=")).collect();
            let spo2: Vec<f64> = readings.iter().filter_map(|l| field(l, "spo2=")).collect();
            responses.push(format!("Here is your summary{name}: {} readings on record.", readings.len()));
            if !hrs.is_empty() {
                let mean = hrs.iter().sum::<f64>() / hrs.len() as f64;
                responses.push(format!("Average heart rate {mean:.0} BPM."));
            }
            if !spo2.is_empty() {
                let mean = spo2.iter().sum::<f64>() / spo2.len() as f64;
                responses.push(format!("Average SpO2 {mean:.0}%."));
            }
        } else if greeting {
            responses.push(format!("Hi{name}! I'm keeping an eye on your band's readings."));
            responses.push("Ask me about your heart rate, oxygen, temperature or activity.".into());
        } else if let Some(last) = readings.last() {
            let reading = last.split_once("] ").map_or(*last, |(_, r)| r);
            responses.push(format!("Your latest reading: {reading}."));
        } else {
            responses.push("I don't have any readings from your band yet.".into());
        }
        AgentOutput {
            personal: json!(!readings.is_empty()),
            image: wants_chart.then(|| ImageRequest {
                metric: if message.contains("oxygen") || message.contains("spo2") {
                    Metric::Spo2
                } else {
                    Metric::Hr
                },
                kind: ChartKind::Line,
                hours: 24.0,
            }),
            urgency: Urgency::NotUrgent,
            responses,
            questions: vec!["Show my heart rate chart".into(), "Summarize my day".into()],
        }
    }
}

impl ModelClient for OfflineAgentClient {
    fn complete(&self, prompt: &str, _params: &ModelParams) -> Result<String, ClientError> {
        let reply = match prompt_line(prompt, TASK_PREFIX) {
            Some(TASK_QC_REVIEW) => json!({"decision": "approve", "reason": "factual and advises follow-up"}).to_string(),
            Some(TASK_SIGNUP_EXTRACT) => {
                serde_json::to_string(&extract_profile_fields(prompt_line(prompt, MESSAGE_PREFIX).unwrap_or("")))
                    .expect("fields serialize")
            }
            Some(TASK_DAILY_SUMMARY) => self.chat(prompt, true).to_json(),
            _ => self.chat(prompt, false).to_json(),
        };
        Ok(reply)
    }
}

/// Profile fields a sign-up reply may carry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileFields {
    pub name: Option<String>,
    pub age: Option<u32>,
    pub bmi: Option<f64>,
    pub medical_background: Option<String>,
    pub demographic: Option<String>,
}

/// Rule-based extraction used by the offline agent.
pub fn extract_profile_fields(message: &str) -> ProfileFields {
    let lower = message.to_lowercase();
    let words: Vec<&str> = message.split_whitespace().collect();
    let clean = |w: &str| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '.').to_owned();
    let mut out = ProfileFields::default();

    for (i, w) in words.iter().enumerate() {
        let lw = clean(w).to_lowercase();
        if lw == "bmi" {
            out.bmi = words.get(i + 1).and_then(|n| clean(n).parse().ok());
        }
    }
    let age_cue = ["old", "age", "i'm", "i am", "im ", "years"].iter().any(|c| lower.contains(c));
    let bare_number = words.len() == 1;
    if age_cue || bare_number {
        out.age = words
            .iter()
            .enumerate()
            .filter(|(i, _)| *i == 0 || clean(words[i - 1]).to_lowercase() != "bmi")
            .find_map(|(_, w)| clean(w).parse::<u32>().ok())
            .filter(|a| (1..=130).contains(a));
    }
    for cue in ["my name is ", "name's ", "call me ", "i'm ", "i am "] {
        if let Some(at) = lower.find(cue) {
            let rest = &message[at + cue.len()..];
            let first = clean(rest.split_whitespace().next().unwrap_or(""));
            if !first.is_empty() && first.chars().all(char::is_alphabetic) && first.chars().next().is_some_and(char::is_uppercase) {
                out.name = Some(first);
                break;
            }
        }
    }
    out
}

pub fn parse_profile_fields(reply: &str) -> Option<ProfileFields> {
    serde_json::from_str(reply.trim().trim_start_matches("```json").trim_matches('`').trim()).ok()
}

/// Outcome of the review pass on a drafted urgent alert.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum QcDecision {
    Approve,
    Revise { text: String },
    Reject { reason: String },
}

#[derive(Deserialize)]
struct QcReply {
    decision: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    reason: Option<String>,
}

pub fn parse_qc(reply: &str) -> Option<QcDecision> {
    let r: QcReply = serde_json::from_str(reply.trim().trim_start_matches("```json").trim_matches('`').trim()).ok()?;
    match r.decision.to_lowercase().as_str() {
        "approve" => Some(QcDecision::Approve),
        "revise" => r.text.filter(|t| !t.trim().is_empty()).map(|text| QcDecision::Revise { text }),
        "reject" => Some(QcDecision::Reject {
            reason: r.reason.unwrap_or_default(),
        }),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("transcription failed: {0}")]
pub struct TranscriptionFailure(pub String);

/// Speech-to-text seam for audio messages.
pub trait Transcriber: Send + Sync {
    fn transcribe(&self, media: &MediaObject) -> Result<String, TranscriptionFailure>;
}

/// Returns the same transcript for every clip.
#[derive(Debug, Clone)]
pub struct FixedTranscriber(pub String);

impl Transcriber for FixedTranscriber {
    fn transcribe(&self, _media: &MediaObject) -> Result<String, TranscriptionFailure> {
        Ok(self.0.clone())
    }
}

/// Treats `text/*` clips as their own transcript; anything else fails. Lets
/// demos send "audio" without a speech service.
#[derive(Debug, Clone, Default)]
pub struct TextClipTranscriber;

impl Transcriber for TextClipTranscriber {
    fn transcribe(&self, media: &MediaObject) -> Result<String, TranscriptionFailure> {
        if !media.content_type.starts_with("text/") {
            return Err(TranscriptionFailure(format!("no speech backend for {}", media.content_type)));
        }
        String::from_utf8(media.bytes.clone())
            .map(|s| s.trim().to_owned())
            .map_err(|e| TranscriptionFailure(e.to_string()))
    }
}
