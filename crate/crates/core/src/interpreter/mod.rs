//! The model-as-regressor path: burst -> prompt -> model -> strict reply
//! parse -> [`VitalEstimate`].

mod oracle;
mod prompt;
mod reply;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use oracle::{reference_reply, SpectralOracleClient};
pub use prompt::{build_prompt, parse_prompt_channels, PromptChannels, INSTRUCTION_BLOCK, REPLY_KEYS};
pub use reply::{parse_reply, serialize_reply, HR_RANGE, SPO2_RANGE};

use crate::dsp::{classify_activity_baseline, ActivityLabel, ActivityThresholds, ConventionalEstimator};
use crate::llm::{ClientError, ModelClient, ModelParams};
use crate::wire::SensorBurst;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum InterpretError {
    #[error("malformed model reply: {0}")]
    MalformedReply(String),
    #[error("model client unavailable: {0}")]
    ClientUnavailable(String),
}

impl From<ClientError> for InterpretError {
    fn from(e: ClientError) -> Self {
        InterpretError::ClientUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VitalSource {
    Llm,
    Conventional,
}

/// Activity as reported: one of the known classes or the model's free text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Activity {
    Known(ActivityLabel),
    Other(String),
}

impl Activity {
    pub fn from_label(s: &str) -> Self {
        match s.parse::<ActivityLabel>() {
            Ok(l) => Activity::Known(l),
            Err(_) => Activity::Other(s.to_owned()),
        }
    }

    pub fn known(&self) -> Option<ActivityLabel> {
        match self {
            Activity::Known(l) => Some(*l),
            Activity::Other(_) => None,
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activity::Known(l) => l.fmt(f),
            Activity::Other(s) => f.write_str(s),
        }
    }
}

impl Serialize for Activity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Activity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Activity::from_label(&s))
    }
}

/// Per-burst vitals. Absent fields are values the source could not provide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalEstimate {
    pub burst_ts: i64,
    pub hr: Option<f64>,
    pub spo2: Option<f64>,
    pub activity: Option<Activity>,
    pub activity_verbose: Option<String>,
    pub temp_body: Option<f64>,
    pub temp_ambient: Option<f64>,
    pub source: VitalSource,
    /// Fields whose reported value was clamped into range.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamped: Vec<String>,
}

impl VitalEstimate {
    pub fn has_hr_and_spo2(&self) -> bool {
        self.hr.is_some() && self.spo2.is_some()
    }
}

/// build_prompt -> client -> parse_reply.
pub fn interpret(
    burst: &SensorBurst,
    client: &dyn ModelClient,
    params: &ModelParams,
) -> Result<VitalEstimate, InterpretError> {
    let prompt = build_prompt(burst);
    let reply = client.complete(&prompt, params)?;
    let mut estimate = parse_reply(&reply)?;
    estimate.burst_ts = i64::from(burst.ts);
    Ok(estimate)
}

/// Maps a conventional estimate (plus activity baseline and mean
/// temperatures) into the common record type.
pub fn conventional_vitals(
    burst: &SensorBurst,
    estimator: &ConventionalEstimator,
    activity: &ActivityThresholds,
) -> VitalEstimate {
    let c = estimator.estimate(burst);
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    VitalEstimate {
        burst_ts: i64::from(burst.ts),
        hr: c.hr_bpm,
        spo2: c.spo2_pct,
        activity: Some(Activity::Known(classify_activity_baseline(
            &burst.accel_x,
            &burst.accel_y,
            &burst.accel_z,
            activity,
        ))),
        activity_verbose: None,
        temp_body: mean(burst.wrist_temp_c()),
        temp_ambient: mean(burst.ambient_temp_c()),
        source: VitalSource::Conventional,
        clamped: Vec::new(),
    }
}

/// Result of the model path with its fallback policy applied.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpretOutcome {
    pub estimate: VitalEstimate,
    pub model_attempts: u32,
    /// Last model-path error when the conventional fallback was used.
    pub llm_error: Option<InterpretError>,
}

impl InterpretOutcome {
    pub fn fell_back(&self) -> bool {
        self.llm_error.is_some()
    }
}

/// Model path with one retry, then the conventional estimate. Always yields
/// exactly one estimate per burst.
pub fn interpret_with_fallback(
    burst: &SensorBurst,
    client: &dyn ModelClient,
    params: &ModelParams,
    estimator: &ConventionalEstimator,
    activity: &ActivityThresholds,
) -> InterpretOutcome {
    let mut last_err = None;
    for attempt in 1..=2 {
        match interpret(burst, client, params) {
            Ok(estimate) => {
                return InterpretOutcome {
                    estimate,
                    model_attempts: attempt,
                    llm_error: None,
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    InterpretOutcome {
        estimate: conventional_vitals(burst, estimator, activity),
        model_attempts: 2,
        llm_error: last_err,
    }
}

#[cfg(test)]
mod tests;
