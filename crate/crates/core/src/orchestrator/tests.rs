use std::sync::Arc;

use super::*;
use crate::clock::SimClock;
use crate::dsp::ActivityLabel;
use crate::interpreter::reference_reply;
use crate::llm::{FixedClient, FnClient, ScriptedClient};
use crate::store::JournalStore;
use crate::tools::{ChartKind, Metric};
use crate::wire::SensorBurst;

const PHONE: &str = "+15550000001";
const T0: i64 = 1_760_000_000;

struct Rig {
    orch: Orchestrator,
    loopback: Arc<LoopbackTransport>,
    clock: Arc<SimClock>,
    agent: Arc<ScriptedClient>,
}

fn rig_with(agent: ScriptedClient, interpreter: Arc<dyn ModelClient>) -> Rig {
    let clock = Arc::new(SimClock::new(T0));
    let agent = Arc::new(agent);
    let (mut services, loopback) = Services::offline(Arc::new(JournalStore::in_memory()), clock.clone());
    services.agent = agent.clone();
    services.interpreter = interpreter;
    let orch = Orchestrator::new(services, OrchestratorConfig::default()).unwrap();
    Rig { orch, loopback, clock, agent }
}

fn minimal(responses: &[&str], questions: &[&str]) -> String {
    serde_json::json!({
        "PERSONAL": false, "IMAGE": null, "URGENCY": "not_urgent",
        "RESPONSES": responses, "QUESTIONS": questions,
    })
    .to_string()
}

/// Registers and completes sign-up without going through the agent.
fn onboard(orch: &Orchestrator, phone: &str, device: &str) -> UserProfile {
    let mut p = orch.register(phone, "1234", Some(device)).unwrap().profile;
    p.name = Some("Ana".into());
    p.age = Some(30);
    p.signup_complete = true;
    orch.store().update_user(p.clone()).unwrap();
    p
}

fn hr_client(hr: f64) -> Arc<dyn ModelClient> {
    Arc::new(FixedClient::new(reference_reply(Some(hr), Some(97.0), Some(ActivityLabel::Sit))))
}

fn burst(device: &str, ts: u32) -> SensorBurst {
    SensorBurst::zeroed(ts, device)
}

fn audit_events(orch: &Orchestrator) -> Vec<AuditEvent> {
    orch.store().audit_log().into_iter().map(|r| r.event).collect()
}

#[test]
fn signup_sends_one_welcome_and_schedules() {
    let r = rig_with(ScriptedClient::default(), hr_client(70.0));
    let first = r.orch.register(PHONE, "1234", None).unwrap();
    assert!(first.created && first.profile.welcomed);
    for _ in 0..3 {
        let again = r.orch.register(PHONE, "1234", None).unwrap();
        assert!(!again.created);
        assert_eq!(again.profile.token, first.profile.token);
    }
    assert!(matches!(r.orch.register(PHONE, "9999", None), Err(OrchestratorError::DuplicatePhone(_))));
    assert_eq!(r.loopback.sent_to(PHONE).len(), 1);
    assert_eq!(r.orch.store().users().len(), 1);
    let mut kinds: Vec<TaskKind> = r.orch.store().tasks().iter().map(|t| t.kind).collect();
    kinds.sort_by_key(|k| format!("{k:?}"));
    assert_eq!(kinds, [TaskKind::DailySummary, TaskKind::NoDataCheck]);
    assert!(matches!(r.orch.register("555", "1", None), Err(OrchestratorError::Profile(_))));
}

#[test]
fn device_cannot_be_paired_twice() {
    let r = rig_with(ScriptedClient::default(), hr_client(70.0));
    r.orch.register(PHONE, "1", Some("band1")).unwrap();
    assert!(matches!(
        r.orch.register("+15550000002", "1", Some("band1")),
        Err(OrchestratorError::DeviceInUse(_))
    ));
}

#[test]
fn signup_conversation_fills_fields() {
    let agent = ScriptedClient::new([r#"{"age": 24}"#, r#"{"name": "Ana"}"#]);
    let r = rig_with(agent, hr_client(70.0));
    r.orch.register(PHONE, "1234", None).unwrap();
    r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 1, "I'm 24")).unwrap();
    let p = r.orch.store().user(PHONE).unwrap();
    assert_eq!(p.age, Some(24));
    assert!(!p.signup_complete);
    r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 2, "Ana")).unwrap();
    let p = r.orch.store().user(PHONE).unwrap();
    assert_eq!(p.name.as_deref(), Some("Ana"));
    assert!(p.signup_complete);
    let last = r.loopback.sent_to(PHONE).pop().unwrap();
    assert!(last.body.contains("all set, Ana"));
}

#[test]
fn hi_dispatches_stub_responses_in_order() {
    let r = rig_with(ScriptedClient::new([minimal(&["Hello!", "How are you\ntoday?"], &["Fine", "Tired"])]), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let before = r.loopback.sent().len();
    let out = r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 5, "hi")).unwrap();
    assert_eq!(out.tier, Some(Tier::Simple));
    assert_eq!(out.attempts, 1);
    let sent = &r.loopback.sent()[before..];
    let bodies: Vec<&str> = sent.iter().map(|e| e.body.as_str()).collect();
    assert_eq!(bodies, ["Hello!", "How are you\ntoday?"]);
    assert!(sent[0].buttons.is_empty());
    assert_eq!(sent[1].buttons, ["Fine", "Tired"]);
    // The simple tier runs on the small model with the short template.
    let (prompt, params) = r.agent.calls().pop().unwrap();
    assert_eq!(params.model_name, "gpt-4o-mini");
    assert!(prompt.contains(MINIMAL_INSTRUCTIONS));
    assert_eq!(r.orch.store().costs().len(), 1);
}

#[test]
fn summary_prompt_has_all_sections_in_order() {
    let r = rig_with(ScriptedClient::new([minimal(&["ok"], &[])]), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    for i in 0..5 {
        r.orch.handle_sensor_burst(&burst("band1", (T0 + i * 240) as u32), false).unwrap();
    }
    let out = r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 2000, "Summarize my week")).unwrap();
    assert_eq!(out.tier, Some(Tier::Reasoning));
    let (prompt, params) = r.agent.calls().pop().unwrap();
    assert_eq!(params.model_name, "o3-mini");
    let pos: Vec<usize> = marker_positions(&prompt).into_iter().map(|p| p.expect("marker present")).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert!(prompt.contains(DETAILED_INSTRUCTIONS));
    assert_eq!(prompt.matches(" hr=70.0 ").count(), 5);
}

#[test]
fn prose_reply_retries_once_then_apologizes() {
    let r = rig_with(ScriptedClient::new(["Your heart is fine!", "Still prose."]), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let before = r.loopback.sent().len();
    let out = r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 5, "hi")).unwrap();
    assert_eq!(r.agent.call_count(), 2);
    assert!(out.apologized);
    assert_eq!(out.attempts, 2);
    assert!(r.agent.calls()[1].0.contains("### REPAIR"));
    let sent = &r.loopback.sent()[before..];
    assert_eq!(sent.len(), 1);
    assert_eq!(sent[0].body, APOLOGY);
    let ev = audit_events(&r.orch);
    assert!(ev.contains(&AuditEvent::SchemaRetry) && ev.contains(&AuditEvent::SchemaFallback));
}

#[test]
fn repair_retry_can_succeed() {
    let r = rig_with(ScriptedClient::new(["nope".to_owned(), minimal(&["fixed"], &[])]), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let out = r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 5, "hi")).unwrap();
    assert!(!out.apologized);
    assert_eq!(out.output.unwrap().responses, ["fixed"]);
}

#[test]
fn audio_and_button_inputs() {
    let r = rig_with(ScriptedClient::default().with_fallback(minimal(&["ok"], &[])), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let clip = r.orch.media().put("text/plain", b"show my heart rate".to_vec()).unwrap();
    let audio = ChatEnvelope::new(Direction::Inbound, PHONE, T0 + 1, MessageKind::Audio, &clip);
    r.orch.handle_user_message(&audio).unwrap();
    let text = ChatEnvelope::inbound_text(PHONE, T0 + 2, "show my heart rate");
    r.orch.handle_user_message(&text).unwrap();
    let calls = r.agent.calls();
    let line = |p: &str| prompt_line(p, MESSAGE_PREFIX).map(str::to_owned);
    assert_eq!(line(&calls[0].0), Some("show my heart rate".into()));
    assert_eq!(line(&calls[0].0), line(&calls[1].0));

    let button = ChatEnvelope::new(Direction::Inbound, PHONE, T0 + 3, MessageKind::Button, "Show my heart rate chart");
    r.orch.handle_user_message(&button).unwrap();
    assert_eq!(line(&r.agent.calls()[2].0), Some("Show my heart rate chart".into()));

    let missing = ChatEnvelope::new(Direction::Inbound, PHONE, T0 + 4, MessageKind::Audio, "0123");
    assert!(matches!(r.orch.handle_user_message(&missing), Err(OrchestratorError::Transcription(_))));
}

#[test]
fn fixed_transcriber_matches_text_flow() {
    let clock = Arc::new(SimClock::new(T0));
    let (mut s, loopback) = Services::offline(Arc::new(JournalStore::in_memory()), clock);
    s.transcriber = Arc::new(FixedTranscriber("show my heart rate".into()));
    let orch = Orchestrator::new(s, OrchestratorConfig::default()).unwrap();
    onboard(&orch, PHONE, "band1");
    let clip = orch.media().put("audio/ogg", vec![1, 2, 3]).unwrap();
    let a = orch
        .handle_user_message(&ChatEnvelope::new(Direction::Inbound, PHONE, T0 + 1, MessageKind::Audio, &clip))
        .unwrap();
    let t = orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 2, "show my heart rate")).unwrap();
    assert_eq!(a.output, t.output);
    assert_eq!(a.tier, t.tier);
    assert!(loopback.sent_to(PHONE).len() > 1);
}

#[test]
fn duplicate_inbound_processed_once() {
    let r = rig_with(ScriptedClient::default().with_fallback(minimal(&["ok"], &[])), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let env = ChatEnvelope::inbound_text(PHONE, T0 + 1, "hi");
    assert!(r.orch.handle_user_message(&env).unwrap().handled);
    assert!(!r.orch.handle_user_message(&env).unwrap().handled);
    assert_eq!(r.agent.call_count(), 1);
}

#[test]
fn unknown_sender_rejected() {
    let r = rig_with(ScriptedClient::default(), hr_client(70.0));
    let env = ChatEnvelope::inbound_text("+15559999999", T0, "hi");
    assert!(matches!(r.orch.handle_user_message(&env), Err(OrchestratorError::UnknownUser(_))));
}

#[test]
fn chart_reply_serves_rendered_bytes() {
    let image_reply = serde_json::json!({
        "PERSONAL": true, "IMAGE": {"metric": "hr", "kind": "line", "hours": 1},
        "URGENCY": "not_urgent", "RESPONSES": ["Here you go"], "QUESTIONS": ["More?"],
    })
    .to_string();
    let r = rig_with(ScriptedClient::new([image_reply]), hr_client(72.0));
    onboard(&r.orch, PHONE, "band1");
    for i in 0..3 {
        r.orch.handle_sensor_burst(&burst("band1", (T0 + i * 240) as u32), false).unwrap();
    }
    r.clock.set(T0 + 1200);
    let out = r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0 + 1200, "chart")).unwrap();
    let img = out.delivered.last().unwrap();
    assert_eq!(img.kind, MessageKind::Image);
    assert_eq!(img.buttons, ["More?"]);
    assert!(img.caption.as_deref().unwrap().contains("Heart rate"));
    let served = r.orch.media().get(&img.body).unwrap();
    let expected = render_chart(
        &ChartRequest {
            user: PHONE.into(),
            metric: Metric::Hr,
            from_ts: T0 + 1200 - 3600,
            to_ts: T0 + 1200,
            kind: ChartKind::Line,
        },
        &r.orch.store().vitals(PHONE, i64::MIN, i64::MAX),
    )
    .unwrap();
    assert_eq!(served.bytes, expected);
    assert_eq!(served.content_type, "image/svg+xml");
}

#[test]
fn chart_without_data_explains() {
    let reply = serde_json::json!({
        "PERSONAL": false, "IMAGE": {"metric": "spo2"}, "URGENCY": "not_urgent",
        "RESPONSES": ["Chart:"], "QUESTIONS": [],
    })
    .to_string();
    let r = rig_with(ScriptedClient::new([reply]), hr_client(72.0));
    onboard(&r.orch, PHONE, "band1");
    let out = r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0, "chart")).unwrap();
    assert_eq!(out.delivered.len(), 2);
    assert!(out.delivered[1].body.contains("no readings"));
}

#[test]
fn normal_burst_is_stored_quietly() {
    let r = rig_with(ScriptedClient::default(), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let before = r.loopback.sent().len();
    let out = r.orch.handle_sensor_burst(&burst("band1", T0 as u32), false).unwrap();
    assert_eq!(out.status, BurstStatus::Stored);
    assert_eq!(out.urgency, Urgency::NotUrgent);
    assert_eq!(r.loopback.sent().len(), before);
    assert_eq!(r.orch.store().vitals(PHONE, T0, T0)[0].hr, Some(70.0));
    let dup = r.orch.handle_sensor_burst(&burst("band1", T0 as u32), false).unwrap();
    assert_eq!(dup.status, BurstStatus::Duplicate);
    assert!(matches!(
        r.orch.handle_sensor_burst(&burst("nobody", T0 as u32), false),
        Err(OrchestratorError::UnknownDevice(_))
    ));
}

#[test]
fn high_hr_with_qc_approval_alerts_once_and_remembers() {
    let r = rig_with(ScriptedClient::new([r#"{"decision":"approve"}"#]), hr_client(150.0));
    onboard(&r.orch, PHONE, "band1");
    let before = r.loopback.sent().len();
    for i in 0..2 {
        let o = r.orch.handle_sensor_burst(&burst("band1", (T0 + i * 240) as u32), false).unwrap();
        assert_eq!(o.urgency, Urgency::NotUrgent, "needs three readings");
    }
    let o = r.orch.handle_sensor_burst(&burst("band1", (T0 + 480) as u32), false).unwrap();
    assert_eq!(o.urgency, Urgency::Urgent);
    assert_eq!(o.qc, Some(QcDecision::Approve));
    let sent = &r.loopback.sent()[before..];
    assert_eq!(sent.len(), 1);
    assert!(sent[0].body.contains("150 BPM"));
    let mem = r.orch.store().memory(PHONE);
    assert_eq!(mem.len(), 1);
    assert_eq!(mem[0].kind, MemoryKind::UrgentAlert);
    assert_eq!(mem[0].vitals.as_ref().unwrap().hr, Some(150.0));
    let ev = audit_events(&r.orch);
    let qc = ev.iter().position(|e| *e == AuditEvent::QcReview).unwrap();
    let sent_at = ev.iter().position(|e| *e == AuditEvent::UrgentDelivered).unwrap();
    assert!(qc < sent_at);
}

#[test]
fn qc_rejection_blocks_delivery() {
    let r = rig_with(ScriptedClient::new([r#"{"decision":"reject","reason":"motion artifact"}"#]), hr_client(150.0));
    onboard(&r.orch, PHONE, "band1");
    let before = r.loopback.sent().len();
    let o = r.orch.handle_sensor_burst(&burst("band1", T0 as u32), true).unwrap();
    assert_eq!(o.urgency, Urgency::Urgent);
    assert!(matches!(o.qc, Some(QcDecision::Reject { .. })));
    assert!(o.delivered.is_empty());
    assert_eq!(r.loopback.sent().len(), before);
    assert!(r.orch.store().memory(PHONE).is_empty());
    let log = r.orch.store().audit_log();
    let rejected = log.iter().find(|a| a.event == AuditEvent::UrgentSuppressed).unwrap();
    assert_eq!(rejected.detail["why"], "qc_rejected");
}

#[test]
fn qc_revision_replaces_text() {
    let r = rig_with(ScriptedClient::new([r#"{"decision":"revise","text":"Your pulse looks high. Rest a moment."}"#]), hr_client(150.0));
    onboard(&r.orch, PHONE, "band1");
    let o = r.orch.handle_sensor_burst(&burst("band1", T0 as u32), true).unwrap();
    assert_eq!(o.delivered[0].body, "Your pulse looks high. Rest a moment.");
}

#[test]
fn anomaly_flag_skips_sustain_window() {
    let r = rig_with(ScriptedClient::new([r#"{"decision":"approve"}"#]), hr_client(150.0));
    onboard(&r.orch, PHONE, "band1");
    let o = r.orch.handle_sensor_burst(&burst("band1", T0 as u32), true).unwrap();
    assert_eq!(o.delivered.len(), 1);
}

#[test]
fn alert_cooldown() {
    let r = rig_with(ScriptedClient::default().with_fallback(r#"{"decision":"approve"}"#), hr_client(150.0));
    onboard(&r.orch, PHONE, "band1");
    assert_eq!(r.orch.handle_sensor_burst(&burst("band1", T0 as u32), true).unwrap().delivered.len(), 1);
    r.clock.advance(240);
    assert!(r.orch.handle_sensor_burst(&burst("band1", (T0 + 240) as u32), true).unwrap().delivered.is_empty());
    r.clock.advance(1800);
    assert_eq!(r.orch.handle_sensor_burst(&burst("band1", (T0 + 2040) as u32), true).unwrap().delivered.len(), 1);
}

#[test]
fn interpreter_failure_falls_back_to_signal_path() {
    let broken: Arc<dyn ModelClient> = Arc::new(FixedClient::new("I cannot read this."));
    let r = rig_with(ScriptedClient::default(), broken);
    onboard(&r.orch, PHONE, "band1");
    let o = r.orch.handle_sensor_burst(&burst("band1", T0 as u32), false).unwrap();
    assert!(o.fell_back);
    assert_eq!(o.estimate.unwrap().source, crate::interpreter::VitalSource::Conventional);
}

#[test]
fn paused_uploads_are_dropped() {
    let r = rig_with(ScriptedClient::default(), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    r.orch.set_uploads_paused(PHONE, true).unwrap();
    assert_eq!(r.orch.handle_sensor_burst(&burst("band1", T0 as u32), false).unwrap().status, BurstStatus::Paused);
    assert!(r.orch.store().vitals(PHONE, i64::MIN, i64::MAX).is_empty());
}

#[test]
fn thresholds_are_validated() {
    let r = rig_with(ScriptedClient::default(), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let bad = AlertThresholds { hr_low: 200.0, ..Default::default() };
    assert!(r.orch.set_thresholds(PHONE, bad).is_err());
    let custom = AlertThresholds { hr_high: 100.0, ..Default::default() };
    assert_eq!(r.orch.set_thresholds(PHONE, custom).unwrap().thresholds.hr_high, 100.0);
}

#[test]
fn scheduled_no_data_and_summary() {
    let r = rig_with(ScriptedClient::default().with_fallback(minimal(&["Daily summary"], &[])), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    let before = r.loopback.sent().len();
    // T0 is 08:53:20 UTC; step through the next 24 h hour by hour.
    let mut fired = 0;
    for h in 1..=24 {
        fired += r.orch.run_due(T0 + h * 3600).unwrap();
    }
    assert_eq!(fired, 24 + 1);
    let sent: Vec<String> = r.loopback.sent()[before..].iter().map(|e| e.body.clone()).collect();
    assert!(sent.iter().any(|b| b == "Daily summary"));
    assert!(sent.iter().filter(|b| b.contains("haven't received")).count() >= 1);
}

#[test]
fn user_reminder_fires_payload() {
    let r = rig_with(ScriptedClient::default(), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    r.orch
        .schedule_reminder(PHONE, TaskKind::MedicationReminder, "30 9 * * *", "Take your vitamin D")
        .unwrap();
    assert!(r.orch.schedule_reminder(PHONE, TaskKind::Custom, "9am daily", "").is_err());
    r.orch.run_due(T0 + 86_400).unwrap();
    assert!(r.loopback.sent_to(PHONE).iter().any(|e| e.body == "Take your vitamin D"));
}

#[test]
fn concurrent_users_keep_per_user_order() {
    let agent = FnClient(|prompt: &str, _: &crate::llm::ModelParams| {
        let msg = prompt_line(prompt, MESSAGE_PREFIX).unwrap_or("").to_owned();
        Ok(minimal(&[&format!("{msg}/a"), &format!("{msg}/b"), &format!("{msg}/c")], &[]))
    });
    let clock = Arc::new(SimClock::new(T0));
    let (mut s, loopback) = Services::offline(Arc::new(JournalStore::in_memory()), clock);
    s.agent = Arc::new(agent);
    let orch = Arc::new(Orchestrator::new(s, OrchestratorConfig::default()).unwrap());
    let phones: Vec<String> = (0..8).map(|i| format!("+1555000100{i}")).collect();
    for (i, p) in phones.iter().enumerate() {
        onboard(&orch, p, &format!("band{i}"));
    }
    std::thread::scope(|sc| {
        for p in &phones {
            let orch = orch.clone();
            sc.spawn(move || {
                for m in 0..20 {
                    orch.handle_user_message(&ChatEnvelope::inbound_text(p, T0 + m, &format!("m{m:02}"))).unwrap();
                }
            });
        }
    });
    for p in &phones {
        let got: Vec<String> = loopback.sent_to(p).into_iter().skip(1).map(|e| e.body).collect();
        let want: Vec<String> = (0..20)
            .flat_map(|m| ["a", "b", "c"].map(|s| format!("m{m:02}/{s}")))
            .collect();
        assert_eq!(got, want, "{p}");
    }
}

#[test]
fn export_and_delete() {
    let r = rig_with(ScriptedClient::default().with_fallback(minimal(&["ok"], &[])), hr_client(70.0));
    onboard(&r.orch, PHONE, "band1");
    r.orch.handle_sensor_burst(&burst("band1", T0 as u32), false).unwrap();
    r.orch.handle_user_message(&ChatEnvelope::inbound_text(PHONE, T0, "hi")).unwrap();
    let ex = r.orch.export_user(PHONE).unwrap();
    assert_eq!(ex.vitals.len(), 1);
    assert!(ex.messages.len() >= 3);
    r.orch.delete_user(PHONE).unwrap();
    assert!(r.orch.store().user(PHONE).is_none());
    assert!(r.orch.store().vitals(PHONE, i64::MIN, i64::MAX).is_empty());
    // Re-registration after deletion starts fresh with a new welcome.
    assert!(r.orch.register(PHONE, "1234", Some("band1")).unwrap().created);
}

#[test]
fn user_documents_are_private() {
    let r = rig_with(ScriptedClient::default().with_fallback(minimal(&["ok"], &[])), hr_client(70.0));
    let a = onboard(&r.orch, PHONE, "band1");
    let b = onboard(&r.orch, "+15550000002", "band2");
    r.orch.add_user_document(&b.phone, "cardiology", "cardiology letter zebrafinch");
    let prompt_for = |p: &UserProfile| {
        r.orch
            .assemble_context(p, TASK_USER_MESSAGE, "explain my zebrafinch letter", Tier::Reasoning)
            .render()
    };
    assert!(!prompt_for(&a).contains("cardiology letter"));
    assert!(prompt_for(&b).contains("cardiology letter"));
}
