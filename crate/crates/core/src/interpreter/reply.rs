use serde_json::{Map, Value};

use super::{Activity, InterpretError, VitalEstimate, VitalSource, REPLY_KEYS};

pub const HR_RANGE: (f64, f64) = (20.0, 250.0);
pub const SPO2_RANGE: (f64, f64) = (50.0, 100.0);
const NOT_AVAILABLE: &str = "N/A";

fn malformed(msg: impl Into<String>) -> InterpretError {
    InterpretError::MalformedReply(msg.into())
}

/// Strips a surrounding markdown code fence, if any.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn is_na(v: &Value) -> bool {
    matches!(v, Value::String(s) if s.trim().eq_ignore_ascii_case(NOT_AVAILABLE))
}

fn number(obj: &Map<String, Value>, key: &str) -> Result<Option<f64>, InterpretError> {
    let v = &obj[key];
    if is_na(v) {
        return Ok(None);
    }
    let n = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    match n {
        Some(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(malformed(format!("field `{key}` is not a number or \"N/A\": {v}"))),
    }
}

fn text(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, InterpretError> {
    match &obj[key] {
        v if is_na(v) => Ok(None),
        Value::String(s) => Ok(Some(s.clone())),
        v => Err(malformed(format!("field `{key}` is not a string: {v}"))),
    }
}

/// Parses the six-field reply. `"N/A"` maps to an absent field; HR and SpO2
/// outside their plausible ranges are clamped and listed in `clamped`.
/// Extra keys are ignored.
pub fn parse_reply(reply: &str) -> Result<VitalEstimate, InterpretError> {
    let value: Value = serde_json::from_str(unfence(reply))
        .map_err(|e| malformed(format!("reply is not JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(malformed("reply is not a JSON object"));
    };
    if let Some(missing) = REPLY_KEYS.iter().find(|k| !obj.contains_key(**k)) {
        return Err(malformed(format!("missing field `{missing}`")));
    }

    let mut clamped = Vec::new();
    let mut clamp = |key: &str, v: Option<f64>, (lo, hi): (f64, f64)| {
        v.map(|x| {
            if x < lo || x > hi {
                clamped.push(key.to_owned());
            }
            x.clamp(lo, hi)
        })
    };
    let hr = clamp("hr", number(&obj, "hr")?, HR_RANGE);
    let spo2 = clamp("spo2", number(&obj, "spo2")?, SPO2_RANGE);
    Ok(VitalEstimate {
        burst_ts: 0,
        hr,
        spo2,
        activity: text(&obj, "activity")?.map(|s| Activity::from_label(&s)),
        activity_verbose: text(&obj, "activity_verbose")?,
        temp_body: number(&obj, "temp_body")?,
        temp_ambient: number(&obj, "temp_ambient")?,
        source: VitalSource::Llm,
        clamped,
    })
}

/// Renders an estimate in reply form (absent fields as `"N/A"`).
pub fn serialize_reply(e: &VitalEstimate) -> String {
    let num = |v: Option<f64>| v.map_or(Value::from(NOT_AVAILABLE), Value::from);
    let txt = |v: Option<String>| Value::from(v.unwrap_or_else(|| NOT_AVAILABLE.to_owned()));
    let mut obj = Map::new();
    obj.insert("hr".into(), num(e.hr));
    obj.insert("spo2".into(), num(e.spo2));
    obj.insert(
        "activity".into(),
        txt(e.activity.as_ref().map(|a| a.to_string())),
    );
    obj.insert("activity_verbose".into(), txt(e.activity_verbose.clone()));
    obj.insert("temp_body".into(), num(e.temp_body));
    obj.insert("temp_ambient".into(), num(e.temp_ambient));
    Value::Object(obj).to_string()
}
