use std::fmt::Write;

use chrono::DateTime;

use super::schema::OUTPUT_SCHEMA_SPEC;
use super::{MemoryEvent, MemoryKind, UserProfile};
use crate::delivery::{ChatEnvelope, Direction};
use crate::interpreter::{VitalEstimate, VitalSource};
use crate::tools::KnowledgePassage;

/// Section headers, in the order they always appear.
pub const SECTION_MARKERS: [&str; 7] = [
    "### CONVERSATIONAL HISTORY",
    "### LONG-TERM MEMORY",
    "### RECENT METRICS",
    "### USER PROFILE",
    "### TEMPORAL CONTEXT",
    "### TASK INSTRUCTIONS",
    "### OUTPUT SCHEMA",
];

/// Line that tells a model (or the offline stub) which job a prompt is for.
pub const TASK_PREFIX: &str = "TASK: ";
/// Line carrying the message being answered.
pub const MESSAGE_PREFIX: &str = "USER MESSAGE: ";

pub fn iso(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| ts.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.1}"))
}

/// Renders one estimate on one line, prefixed by its burst time.
pub fn metric_line(v: &VitalEstimate) -> String {
    let activity = v
        .activity
        .as_ref()
        .map_or_else(|| "n/a".to_owned(), |a| a.to_string());
    let source = match v.source {
        VitalSource::Llm => "model",
        VitalSource::Conventional => "signal",
    };
    format!(
        "[{}] hr={} spo2={} activity={} temp_body={} temp_ambient={} source={}",
        iso(v.burst_ts),
        opt(v.hr),
        opt(v.spo2),
        activity,
        opt(v.temp_body),
        opt(v.temp_ambient),
        source
    )
}

/// Everything the agent model sees for one request.
#[derive(Debug, Clone)]
pub struct ContextBundle {
    pub task: String,
    pub history: Vec<ChatEnvelope>,
    pub memory: Vec<MemoryEvent>,
    pub metrics: Vec<VitalEstimate>,
    pub profile: UserProfile,
    pub now: i64,
    pub instructions: String,
    pub message: Option<String>,
    pub knowledge: Vec<KnowledgePassage>,
}

impl ContextBundle {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let [hist, mem, metrics, profile, temporal, task, schema] = SECTION_MARKERS;

        let _ = writeln!(s, "{hist}");
        if self.history.is_empty() {
            s.push_str("(no earlier messages)\n");
        }
        for m in &self.history {
            let who = match m.direction {
                Direction::Inbound => "user",
                Direction::Outbound => "assistant",
            };
            let _ = writeln!(s, "[{}] {who}: {}", iso(m.ts), m.body.replace('\n', " / "));
        }

        let _ = writeln!(s, "\n{mem}");
        let urgent: Vec<&MemoryEvent> = self.memory.iter().filter(|e| e.kind == MemoryKind::UrgentAlert).collect();
        if urgent.is_empty() {
            s.push_str("(no urgent events on record)\n");
        }
        for e in urgent {
            let _ = writeln!(s, "[{}] urgent alert: {}", iso(e.ts), e.summary);
        }

        let _ = writeln!(s, "\n{metrics}");
        if self.metrics.is_empty() {
            s.push_str("(no readings yet)\n");
        }
        for v in &self.metrics {
            let _ = writeln!(s, "{}", metric_line(v));
        }

        let p = &self.profile;
        let _ = writeln!(s, "\n{profile}");
        let _ = writeln!(s, "name: {}", p.name.as_deref().unwrap_or("unknown"));
        let _ = writeln!(s, "age: {}", p.age.map_or("unknown".into(), |a| a.to_string()));
        let _ = writeln!(s, "bmi: {}", p.bmi.map_or("unknown".into(), |b| format!("{b:.1}")));
        let _ = writeln!(s, "medical background: {}", p.medical_background.as_deref().unwrap_or("none given"));
        let _ = writeln!(s, "demographic: {}", p.demographic.as_deref().unwrap_or("none given"));
        let t = &p.thresholds;
        let _ = writeln!(
            s,
            "alert bounds: hr {}-{} BPM, spo2 below {}%, wrist temp above {} C",
            t.hr_low, t.hr_high, t.spo2_low, t.temp_high
        );
        let _ = writeln!(s, "[{}] registered", iso(p.created_at));

        let _ = writeln!(s, "\n{temporal}");
        let _ = writeln!(s, "now: {}", iso(self.now));
        if let Some(d) = DateTime::from_timestamp(self.now, 0) {
            let _ = writeln!(s, "weekday: {}", d.format("%A"));
        }
        match self.metrics.last() {
            Some(v) => {
                let _ = writeln!(s, "latest reading: {} ({} min ago)", iso(v.burst_ts), (self.now - v.burst_ts) / 60);
            }
            None => s.push_str("latest reading: none\n"),
        }

        let _ = writeln!(s, "\n{task}");
        let _ = writeln!(s, "{TASK_PREFIX}{}", self.task);
        let _ = writeln!(s, "{}", self.instructions.trim_end());
        for k in &self.knowledge {
            let _ = writeln!(s, "reference [{}]: {}", k.doc_id, k.text.replace('\n', " "));
        }
        if let Some(m) = &self.message {
            let _ = writeln!(s, "{MESSAGE_PREFIX}{}", m.replace('\n', " / "));
        }

        let _ = writeln!(s, "\n{schema}");
        s.push_str(OUTPUT_SCHEMA_SPEC);
        s.push('\n');
        s
    }
}

/// Short instructions for quick factual questions.
pub const MINIMAL_INSTRUCTIONS: &str = "You are a friendly wellness assistant on a chat app. \
Answer the user's message briefly using the latest readings. You are not a doctor.";

/// Long-form instructions for summaries, trends and risk questions.
pub const DETAILED_INSTRUCTIONS: &str = "You are a careful wellness assistant on a chat app, \
not a medical device. Read the recent metrics in time order and relate them to the profile \
and any urgent events on record. Mention trends with their time span, call out readings \
outside the user's alert bounds, and suggest conservative self-care steps. If something \
could be serious, say so plainly, set URGENCY to \"urgent\" and advise contacting a health \
professional. Split the answer into short messages. Offer a chart through IMAGE when a \
trend is easier to see than to read.";

/// Message ids of the positions of each marker, for tests and debugging.
pub fn marker_positions(prompt: &str) -> Vec<Option<usize>> {
    SECTION_MARKERS.iter().map(|m| prompt.find(m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpreter::VitalSource;

    fn bundle() -> ContextBundle {
        let mut profile = UserProfile::new("+15550000001", "pw", "dev", 1_700_000_000).unwrap();
        profile.name = Some("Ana".into());
        ContextBundle {
            task: "user_message".into(),
            history: vec![ChatEnvelope::inbound_text("+15550000001", 1_700_000_100, "hi\nthere")],
            memory: vec![MemoryEvent {
                user: "+15550000001".into(),
                ts: 1_700_000_200,
                kind: MemoryKind::UrgentAlert,
                summary: "hr 140".into(),
                vitals: None,
            }],
            metrics: vec![VitalEstimate {
                burst_ts: 1_700_000_300,
                hr: Some(72.0),
                spo2: None,
                activity: None,
                activity_verbose: None,
                temp_body: Some(33.2),
                temp_ambient: None,
                source: VitalSource::Llm,
                clamped: vec![],
            }],
            profile,
            now: 1_700_000_900,
            instructions: DETAILED_INSTRUCTIONS.into(),
            message: Some("summarize my week".into()),
            knowledge: vec![],
        }
    }

    #[test]
    fn sections_in_order() {
        let text = bundle().render();
        let pos: Vec<usize> = marker_positions(&text).into_iter().map(Option::unwrap).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    }

    #[test]
    fn records_are_timestamped_and_secrets_omitted() {
        let b = bundle();
        let text = b.render();
        assert!(text.contains("[2023-11-14T22:15:00Z] user: hi / there"));
        assert!(text.contains("[2023-11-14T22:16:40Z] urgent alert: hr 140"));
        assert!(text.contains("[2023-11-14T22:18:20Z] hr=72.0 spo2=n/a"));
        assert!(text.contains("now: 2023-11-14T22:28:20Z"));
        assert!(text.contains("TASK: user_message"));
        assert!(text.contains("USER MESSAGE: summarize my week"));
        assert!(!text.contains(&b.profile.token));
        assert!(!text.contains(&b.profile.passcode_hash));
    }
}
