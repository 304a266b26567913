//! Control core: the sensor flow (interpret, persist, check urgency, review,
//! deliver) and the message flow (classify, assemble context, call the
//! model, enforce the schema, dispatch), with per-user serialization.

mod agent;
mod context;
mod profile;
mod schema;
mod urgency;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde_json::json;

pub use agent::{
    extract_profile_fields, parse_profile_fields, parse_qc, prompt_line, FixedTranscriber, OfflineAgentClient,
    ProfileFields, QcDecision, TextClipTranscriber, Transcriber, TranscriptionFailure, TASK_DAILY_SUMMARY,
    TASK_QC_REVIEW, TASK_SIGNUP_EXTRACT, TASK_USER_MESSAGE,
};
pub use context::{
    iso, marker_positions, metric_line, ContextBundle, DETAILED_INSTRUCTIONS, MESSAGE_PREFIX, MINIMAL_INSTRUCTIONS,
    SECTION_MARKERS, TASK_PREFIX,
};
pub use profile::{
    hash_passcode, new_device_id, validate_phone, AlertThresholds, MemoryEvent, MemoryKind, Preferences,
    ProfileError, UserProfile,
};
pub use schema::{enforce_schema, AgentOutput, ImageRequest, SchemaViolation, Urgency, OUTPUT_KEYS, OUTPUT_SCHEMA_SPEC};
pub use urgency::{draft_alert, urgency_reasons};

use crate::clock::Clock;
use crate::config::OrchestratorConfig;
use crate::delivery::{
    envelopes_for, ChatEnvelope, DeliveryError, Direction, Dispatcher, LoopbackTransport, MediaStore, MessageKind,
    Transport,
};
use crate::dsp::{ConventionalEstimator, DspError};
use crate::interpreter::{interpret_with_fallback, SpectralOracleClient, VitalEstimate};
use crate::llm::ModelClient;
use crate::router::{cost, HeuristicClassifier, QueryClassifier, Tier};
use crate::store::{AuditEvent, AuditRecord, CostEntry, Storage, StoreError, UserExport};
use crate::tools::{
    fire_no_data_check, render_chart, ChartRequest, KnowledgeIndex, PassageSource, Scheduler, TaskKind, ToolError,
};
use crate::wire::SensorBurst;

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("phone {0} is already registered with a different passcode")]
    DuplicatePhone(String),
    #[error("device {0} is already paired with another user")]
    DeviceInUse(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("storage failure: {0}")]
    StorageFailure(#[from] StoreError),
    #[error(transparent)]
    Transcription(#[from] TranscriptionFailure),
    #[error(transparent)]
    Delivery(#[from] DeliveryError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

type Result<T> = std::result::Result<T, OrchestratorError>;

/// External collaborators, injectable for tests.
pub struct Services {
    pub store: Arc<dyn Storage>,
    pub clock: Arc<dyn Clock>,
    /// Vital-sign interpreter model.
    pub interpreter: Arc<dyn ModelClient>,
    /// Conversational agent, QC reviewer and sign-up extractor.
    pub agent: Arc<dyn ModelClient>,
    pub classifier: Arc<dyn QueryClassifier>,
    pub transcriber: Arc<dyn Transcriber>,
    pub transport: Arc<dyn Transport>,
    pub media: Arc<MediaStore>,
    pub knowledge: KnowledgeIndex,
}

impl Services {
    /// Fully offline wiring: spectral oracle interpreter, rule-based agent,
    /// keyword router, loopback transport and in-memory media.
    pub fn offline(store: Arc<dyn Storage>, clock: Arc<dyn Clock>) -> (Self, Arc<LoopbackTransport>) {
        let loopback = Arc::new(LoopbackTransport::new());
        let services = Services {
            store,
            clock,
            interpreter: Arc::new(SpectralOracleClient::default()),
            agent: Arc::new(OfflineAgentClient),
            classifier: Arc::new(HeuristicClassifier::default()),
            transcriber: Arc::new(TextClipTranscriber),
            transport: loopback.clone(),
            media: Arc::new(MediaStore::in_memory()),
            knowledge: KnowledgeIndex::bundled(),
        };
        (services, loopback)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignupOutcome {
    pub profile: UserProfile,
    /// False when the phone was already registered with the same passcode.
    pub created: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurstStatus {
    Stored,
    /// Same device and timestamp seen before; nothing done.
    Duplicate,
    /// The user paused uploads; nothing stored.
    Paused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstOutcome {
    pub status: BurstStatus,
    pub estimate: Option<VitalEstimate>,
    pub fell_back: bool,
    pub urgency: Urgency,
    pub reasons: Vec<String>,
    pub qc: Option<QcDecision>,
    pub delivered: Vec<ChatEnvelope>,
}

impl BurstOutcome {
    fn skipped(status: BurstStatus) -> Self {
        BurstOutcome {
            status,
            estimate: None,
            fell_back: false,
            urgency: Urgency::NotUrgent,
            reasons: Vec::new(),
            qc: None,
            delivered: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageOutcome {
    /// False for a replayed inbound envelope that was ignored.
    pub handled: bool,
    pub output: Option<AgentOutput>,
    pub tier: Option<Tier>,
    /// Model calls made for the reply.
    pub attempts: u32,
    /// The model never produced a valid reply and an apology was sent.
    pub apologized: bool,
    pub delivered: Vec<ChatEnvelope>,
}

const APOLOGY: &str = "Sorry, I couldn't put an answer together just now. Please try again in a moment.";

const WELCOME: &str = "Welcome to VitalChat! I turn your band's readings into plain-language \
tips and check in when something looks off. I'm here for everyday wellness, not medical diagnosis.\n\
To set up your profile, what's your name and how old are you?";

pub struct Orchestrator {
    store: Arc<dyn Storage>,
    clock: Arc<dyn Clock>,
    interpreter: Arc<dyn ModelClient>,
    agent: Arc<dyn ModelClient>,
    classifier: Arc<dyn QueryClassifier>,
    transcriber: Arc<dyn Transcriber>,
    media: Arc<MediaStore>,
    knowledge: RwLock<KnowledgeIndex>,
    dispatcher: Dispatcher,
    scheduler: Scheduler,
    estimator: ConventionalEstimator,
    config: OrchestratorConfig,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    seen_inbound: Mutex<HashSet<(String, i64, MessageKind, String)>>,
    signup_lock: Mutex<()>,
}

impl Orchestrator {
    pub fn new(services: Services, config: OrchestratorConfig) -> Result<Self> {
        let estimator = ConventionalEstimator::new(config.gating.clone(), config.ppg_rate_hz)?;
        Ok(Orchestrator {
            scheduler: Scheduler::new(services.store.clone()),
            dispatcher: Dispatcher::new(services.transport),
            store: services.store,
            clock: services.clock,
            interpreter: services.interpreter,
            agent: services.agent,
            classifier: services.classifier,
            transcriber: services.transcriber,
            media: services.media,
            knowledge: RwLock::new(services.knowledge),
            estimator,
            config,
            locks: Mutex::new(HashMap::new()),
            seen_inbound: Mutex::new(HashSet::new()),
            signup_lock: Mutex::new(()),
        })
    }

    pub fn store(&self) -> &Arc<dyn Storage> {
        &self.store
    }

    pub fn media(&self) -> &Arc<MediaStore> {
        &self.media
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    fn user_lock(&self, phone: &str) -> Arc<Mutex<()>> {
        self.locks.lock().entry(phone.to_owned()).or_default().clone()
    }

    fn audit(&self, user: Option<&str>, event: AuditEvent, detail: serde_json::Value) -> Result<()> {
        self.store.audit(AuditRecord::new(self.clock.now(), user, event, detail))?;
        Ok(())
    }

    /// Sends and records outbound envelopes. Transport outages queue them.
    fn send(&self, envelopes: Vec<ChatEnvelope>) -> Result<Vec<ChatEnvelope>> {
        let stamped: Vec<ChatEnvelope> = envelopes
            .into_iter()
            .map(|mut e| {
                if e.id.is_empty() {
                    e.id = uuid::Uuid::new_v4().simple().to_string();
                }
                e
            })
            .collect();
        self.dispatcher.dispatch(stamped.clone())?;
        for e in &stamped {
            self.store.append_message(e.clone())?;
        }
        Ok(stamped)
    }

    /// Retries envelopes held back by a transport outage.
    pub fn retry_deliveries(&self) -> usize {
        self.dispatcher.retry_pending().sent
    }

    // ---- sign-up ----------------------------------------------------------

    /// Minimal registration. Repeating it with the same passcode is a no-op
    /// that returns the existing profile; the welcome goes out once.
    pub fn register(&self, phone: &str, passcode: &str, device_id: Option<&str>) -> Result<SignupOutcome> {
        validate_phone(phone)?;
        let _global = self.signup_lock.lock();
        let lock = self.user_lock(phone);
        let _guard = lock.lock();
        if let Some(existing) = self.store.user(phone) {
            if existing.check_passcode(passcode) {
                return Ok(SignupOutcome {
                    profile: existing,
                    created: false,
                });
            }
            return Err(OrchestratorError::DuplicatePhone(phone.to_owned()));
        }
        let device = device_id.map(str::to_owned).unwrap_or_else(new_device_id);
        if self.store.user_by_device(&device).is_some() {
            return Err(OrchestratorError::DeviceInUse(device));
        }
        let now = self.clock.now();
        let mut profile = UserProfile::new(phone, passcode, &device, now)?;
        self.store.insert_user(profile.clone())?;
        self.audit(Some(phone), AuditEvent::Signup, json!({"device_id": device}))?;

        self.scheduler
            .schedule(phone, TaskKind::DailySummary, &profile.preferences.summary_cron, "", now)?;
        self.scheduler
            .schedule(phone, TaskKind::NoDataCheck, &self.config.no_data_cron, "", now)?;

        self.send(vec![ChatEnvelope::outbound_text(phone, now, WELCOME)])?;
        profile.welcomed = true;
        self.store.update_user(profile.clone())?;
        self.audit(Some(phone), AuditEvent::Welcome, serde_json::Value::Null)?;
        Ok(SignupOutcome { profile, created: true })
    }

    fn signup_turn(&self, mut profile: UserProfile, text: &str) -> Result<AgentOutput> {
        let prompt = format!(
            "{TASK_PREFIX}{TASK_SIGNUP_EXTRACT}\nExtract profile details from the user's message. Reply with a JSON \
             object with keys name, age, bmi, medical_background, demographic; use null for anything not stated.\n\
             {MESSAGE_PREFIX}{}\n",
            text.replace('\n', " / ")
        );
        let params = self.config.agent_params(&self.config.models.simple);
        let fields = self
            .agent
            .complete(&prompt, &params)
            .ok()
            .and_then(|r| parse_profile_fields(&r))
            .unwrap_or_default();
        if let Some(n) = fields.name.filter(|n| !n.trim().is_empty()) {
            profile.name = Some(n.trim().to_owned());
        }
        if let Some(a) = fields.age.filter(|a| (1..=130).contains(a)) {
            profile.age = Some(a);
        }
        if let Some(b) = fields.bmi.filter(|b| (10.0..=80.0).contains(b)) {
            profile.bmi = Some(b);
        }
        if fields.medical_background.is_some() {
            profile.medical_background = fields.medical_background;
        }
        if fields.demographic.is_some() {
            profile.demographic = fields.demographic;
        }
        let missing = profile.missing_required();
        let reply = match missing.first() {
            Some(&"name") => "Thanks! What should I call you?".to_owned(),
            Some(_) => "Thanks! How old are you?".to_owned(),
            None => {
                profile.signup_complete = true;
                format!(
                    "You're all set, {}! Wear your band and I'll keep an eye on your readings. \
                     You can tell me about any health background or ask me anything.",
                    profile.name.as_deref().unwrap_or("friend")
                )
            }
        };
        self.store.update_user(profile)?;
        Ok(AgentOutput::text([reply]))
    }

    // ---- sensor flow ------------------------------------------------------

    /// Interprets and stores one burst, then runs the urgency check.
    /// `anomaly` marks bursts the band flagged for immediate evaluation.
    pub fn handle_sensor_burst(&self, burst: &SensorBurst, anomaly: bool) -> Result<BurstOutcome> {
        let profile = self
            .store
            .user_by_device(&burst.device_id)
            .ok_or_else(|| OrchestratorError::UnknownDevice(burst.device_id.clone()))?;
        let phone = profile.phone.clone();
        let lock = self.user_lock(&phone);
        let _guard = lock.lock();
        if profile.preferences.uploads_paused {
            return Ok(BurstOutcome::skipped(BurstStatus::Paused));
        }
        let ts = i64::from(burst.ts);
        if self.store.has_vital(&phone, ts) {
            return Ok(BurstOutcome::skipped(BurstStatus::Duplicate));
        }

        let outcome = interpret_with_fallback(
            burst,
            self.interpreter.as_ref(),
            &self.config.interpreter,
            &self.estimator,
            &self.config.activity,
        );
        let estimate = outcome.estimate.clone();
        self.store.put_vital(&phone, estimate.clone())?;
        self.audit(
            Some(&phone),
            AuditEvent::SensorBurst,
            json!({"burst_ts": ts, "source": estimate.source, "fell_back": outcome.fell_back(), "anomaly": anomaly}),
        )?;

        let need = profile.thresholds.hr_sustain.max(1);
        let history = self.store.recent_vitals(&phone, need);
        let reasons = urgency_reasons(&profile.thresholds, &history, anomaly);
        let mut result = BurstOutcome {
            status: BurstStatus::Stored,
            estimate: Some(estimate.clone()),
            fell_back: outcome.fell_back(),
            urgency: if reasons.is_empty() { Urgency::NotUrgent } else { Urgency::Urgent },
            reasons: reasons.clone(),
            qc: None,
            delivered: Vec::new(),
        };
        if reasons.is_empty() {
            return Ok(result);
        }

        let now = self.clock.now();
        let last_alert = self
            .store
            .memory(&phone)
            .iter()
            .filter(|e| e.kind == MemoryKind::UrgentAlert)
            .map(|e| e.ts)
            .max();
        if last_alert.is_some_and(|t| now - t < self.config.alert_cooldown_s) {
            self.audit(
                Some(&phone),
                AuditEvent::UrgentSuppressed,
                json!({"burst_ts": ts, "why": "cooldown", "reasons": reasons}),
            )?;
            return Ok(result);
        }

        let draft = draft_alert(&reasons);
        self.audit(Some(&phone), AuditEvent::UrgentDraft, json!({"burst_ts": ts, "draft": draft}))?;
        let decision = self.review_alert(&draft, &estimate);
        self.audit(Some(&phone), AuditEvent::QcReview, json!({"burst_ts": ts, "decision": decision}))?;
        result.qc = Some(decision.clone());

        let text = match decision {
            QcDecision::Approve => draft,
            QcDecision::Revise { text } => text,
            QcDecision::Reject { reason } => {
                self.audit(
                    Some(&phone),
                    AuditEvent::UrgentSuppressed,
                    json!({"burst_ts": ts, "why": "qc_rejected", "reason": reason}),
                )?;
                return Ok(result);
            }
        };
        let output = AgentOutput {
            personal: json!(true),
            image: None,
            urgency: Urgency::Urgent,
            responses: vec![text.clone()],
            questions: vec!["What should I do now?".into(), "Show my heart rate chart".into()],
        };
        result.delivered = self.send(envelopes_for(&output, &phone, now, None))?;
        self.audit(
            Some(&phone),
            AuditEvent::UrgentDelivered,
            json!({"burst_ts": ts, "message_ids": result.delivered.iter().map(|e| &e.id).collect::<Vec<_>>()}),
        )?;
        self.store.append_memory(MemoryEvent {
            user: phone,
            ts: now,
            kind: MemoryKind::UrgentAlert,
            summary: text,
            vitals: Some(estimate),
        })?;
        Ok(result)
    }

    /// Second model pass over a drafted alert. A reviewer that cannot be
    /// reached or answers off-format approves the draft unchanged: dropping a
    /// safety alert is worse than sending the unreviewed template.
    fn review_alert(&self, draft: &str, estimate: &VitalEstimate) -> QcDecision {
        let prompt = format!(
            "{TASK_PREFIX}{TASK_QC_REVIEW}\nYou review an automated wellness alert before it is sent. Check it is \
             consistent with the reading, calm, and does not diagnose. Reply with JSON: {{\"decision\": \
             \"approve\"|\"revise\"|\"reject\", \"text\": revised message when revising, \"reason\": short reason}}.\n\
             Reading: {}\nDraft: {draft}\n",
            metric_line(estimate)
        );
        let params = self.config.agent_params(&self.config.qc_model);
        self.agent
            .complete(&prompt, &params)
            .ok()
            .and_then(|r| parse_qc(&r))
            .unwrap_or(QcDecision::Approve)
    }

    // ---- message flow -----------------------------------------------------

    /// Handles one inbound chat message. Replays of the same (phone, ts,
    /// kind, body) are ignored.
    pub fn handle_user_message(&self, envelope: &ChatEnvelope) -> Result<MessageOutcome> {
        envelope.validate()?;
        if envelope.direction != Direction::Inbound {
            return Err(DeliveryError::InvalidEnvelope("expected an inbound message".into()).into());
        }
        let phone = envelope.user_phone.clone();
        if self.store.user(&phone).is_none() {
            return Err(OrchestratorError::UnknownUser(phone));
        }
        let lock = self.user_lock(&phone);
        let _guard = lock.lock();
        let key = (phone.clone(), envelope.ts, envelope.kind, envelope.body.clone());
        if !self.seen_inbound.lock().insert(key) {
            return Ok(MessageOutcome {
                handled: false,
                output: None,
                tier: None,
                attempts: 0,
                apologized: false,
                delivered: Vec::new(),
            });
        }

        let text = match envelope.kind {
            MessageKind::Text | MessageKind::Button => envelope.body.clone(),
            MessageKind::Audio => {
                let media = self
                    .media
                    .get(&envelope.body)
                    .ok_or_else(|| TranscriptionFailure(format!("unknown media {}", envelope.body)))?;
                self.transcriber.transcribe(&media)?
            }
            MessageKind::Image => "[image]".to_owned(),
        };
        let mut stored = envelope.clone();
        if stored.id.is_empty() {
            stored.id = uuid::Uuid::new_v4().simple().to_string();
        }
        if envelope.kind == MessageKind::Audio {
            stored.reply_to = Some(envelope.body.clone());
            stored.kind = MessageKind::Text;
            stored.body = text.clone();
        }
        self.store.append_message(stored)?;

        let profile = self.store.user(&phone).ok_or_else(|| OrchestratorError::UnknownUser(phone.clone()))?;
        if !profile.signup_complete {
            let output = self.signup_turn(profile, &text)?;
            let delivered = self.send(envelopes_for(&output, &phone, self.clock.now(), None))?;
            self.audit(Some(&phone), AuditEvent::UserFlow, json!({"flow": "signup"}))?;
            return Ok(MessageOutcome {
                handled: true,
                output: Some(output),
                tier: None,
                attempts: 1,
                apologized: false,
                delivered,
            });
        }

        let tier = self.classifier.classify(&text);
        let (output, attempts, apologized) = self.run_agent(&profile, TASK_USER_MESSAGE, &text, tier)?;
        let delivered = self.deliver_output(&phone, &output)?;
        self.audit(
            Some(&phone),
            AuditEvent::UserFlow,
            json!({"tier": tier, "model": self.config.models.model(tier), "attempts": attempts, "apologized": apologized}),
        )?;
        Ok(MessageOutcome {
            handled: true,
            output: Some(output),
            tier: Some(tier),
            attempts,
            apologized,
            delivered,
        })
    }

    /// Builds the prompt for `task` at the depth implied by `tier`.
    pub fn assemble_context(&self, profile: &UserProfile, task: &str, message: &str, tier: Tier) -> ContextBundle {
        let detailed = tier != Tier::Simple || task == TASK_DAILY_SUMMARY;
        let (turns, metrics) = if detailed {
            (self.config.history_turns, self.config.metrics_window)
        } else {
            (self.config.simple_history_turns, self.config.simple_metrics_window)
        };
        let mut history = self.store.messages(&profile.phone, turns + 1);
        // The newest inbound message is carried separately.
        if history
            .last()
            .is_some_and(|m| m.direction == Direction::Inbound && m.body == message)
        {
            history.pop();
        }
        if history.len() > turns {
            history.drain(..history.len() - turns);
        }
        let knowledge = if detailed && self.config.knowledge_k > 0 {
            self.lookup_knowledge(&profile.phone, message, self.config.knowledge_k)
        } else {
            Vec::new()
        };
        ContextBundle {
            task: task.to_owned(),
            history,
            memory: self.store.memory(&profile.phone),
            metrics: self.store.recent_vitals(&profile.phone, metrics),
            profile: profile.clone(),
            now: self.clock.now(),
            instructions: if detailed { DETAILED_INSTRUCTIONS } else { MINIMAL_INSTRUCTIONS }.to_owned(),
            message: Some(message.to_owned()),
            knowledge,
        }
    }

    fn lookup_knowledge(&self, phone: &str, message: &str, k: usize) -> Vec<crate::tools::KnowledgePassage> {
        let own = format!("user/{phone}/");
        let idx = self.knowledge.read();
        idx.retrieve(message, idx.len())
            .unwrap_or_default()
            .into_iter()
            .filter(|p| p.score > 0.0)
            .filter(|p| p.source == PassageSource::GeneralCorpus || p.doc_id.starts_with(&own))
            .take(k)
            .collect()
    }

    /// Adds a user-provided document to the retrieval index.
    pub fn add_user_document(&self, phone: &str, name: &str, text: &str) {
        self.knowledge
            .write()
            .add(&format!("user/{phone}/{name}"), text, PassageSource::UserUploaded);
    }

    /// Calls the agent model with one repair retry; falls back to an apology.
    fn run_agent(&self, profile: &UserProfile, task: &str, message: &str, tier: Tier) -> Result<(AgentOutput, u32, bool)> {
        let prompt = self.assemble_context(profile, task, message, tier).render();
        let model = self.config.models.model(tier).to_owned();
        let params = self.config.agent_params(&model);
        let options = self.config.cost_options();
        let mut request = prompt.clone();
        let mut attempts = 0;
        for _ in 0..=self.config.schema_retries {
            attempts += 1;
            let record = cost(&uuid::Uuid::new_v4().simple().to_string(), &request, tier, &self.config.prices, &options);
            if let Ok(record) = record {
                self.store.record_cost(CostEntry {
                    user: Some(profile.phone.clone()),
                    ts: self.clock.now(),
                    record,
                })?;
            }
            let problem = match self.agent.complete(&request, &params) {
                Ok(reply) => match enforce_schema(&reply) {
                    Ok(out) => return Ok((out, attempts, false)),
                    Err(e) => e.0,
                },
                Err(e) => e.to_string(),
            };
            self.audit(Some(&profile.phone), AuditEvent::SchemaRetry, json!({"attempt": attempts, "problem": problem}))?;
            request = format!(
                "{prompt}\n### REPAIR\nYour previous reply was rejected: {problem}\nReply again with only the JSON object described above.\n"
            );
        }
        self.audit(Some(&profile.phone), AuditEvent::SchemaFallback, json!({"attempts": attempts}))?;
        let mut out = AgentOutput::text([APOLOGY]);
        out.personal = json!(false);
        Ok((out, attempts, true))
    }

    /// Turns an agent reply into envelopes, rendering and storing the chart
    /// first when one is requested.
    fn deliver_output(&self, phone: &str, output: &AgentOutput) -> Result<Vec<ChatEnvelope>> {
        let now = self.clock.now();
        let mut output = output.clone();
        let mut image = None;
        if let Some(req) = output.image.clone() {
            let from = now - (req.hours * 3600.0).round() as i64;
            let chart = ChartRequest {
                user: phone.to_owned(),
                metric: req.metric,
                from_ts: from,
                to_ts: now,
                kind: req.kind,
            };
            match render_chart(&chart, &self.store.vitals(phone, from, now)) {
                Ok(svg) => {
                    let id = self.media.put("image/svg+xml", svg)?;
                    let caption = format!("{} over the last {} hours", chart.metric.label(), req.hours);
                    image = Some((id, caption));
                }
                Err(ToolError::NoData) => output.responses.push(format!(
                    "I couldn't draw that chart: there are no readings from the last {} hours.",
                    req.hours
                )),
                Err(e) => return Err(e.into()),
            }
        }
        let envs = envelopes_for(&output, phone, now, image.as_ref().map(|(id, c)| (id.as_str(), c.as_str())));
        self.send(envs)
    }

    // ---- scheduled work ---------------------------------------------------

    /// Runs every scheduled task due at `now`. Returns the firings handled.
    pub fn run_due(&self, now: i64) -> Result<usize> {
        let firings = self.scheduler.tick(now)?;
        for f in &firings {
            let Some(profile) = self.store.user(&f.user) else {
                continue;
            };
            let lock = self.user_lock(&f.user);
            let _guard = lock.lock();
            self.audit(
                Some(&f.user),
                AuditEvent::ScheduledFire,
                json!({"task_id": f.task_id, "kind": f.kind, "scheduled_ts": f.scheduled_ts}),
            )?;
            match f.kind {
                TaskKind::NoDataCheck => {
                    if profile.preferences.uploads_paused {
                        continue;
                    }
                    if let Some(env) = fire_no_data_check(self.store.as_ref(), &f.user, now, self.config.no_data_interval_s) {
                        self.send(vec![env])?;
                    }
                }
                TaskKind::DailySummary => {
                    if !profile.signup_complete {
                        continue;
                    }
                    let (out, _, _) = self.run_agent(&profile, TASK_DAILY_SUMMARY, "Summarize my day", Tier::Reasoning)?;
                    self.deliver_output(&f.user, &out)?;
                }
                TaskKind::MedicationReminder | TaskKind::Custom => {
                    let body = if f.payload.is_empty() { "Reminder" } else { f.payload.as_str() };
                    self.send(vec![ChatEnvelope::outbound_text(&f.user, now, body)])?;
                }
            }
        }
        Ok(firings.len())
    }

    /// User-requested reminder.
    pub fn schedule_reminder(&self, phone: &str, kind: TaskKind, cron_expr: &str, payload: &str) -> Result<String> {
        if self.store.user(phone).is_none() {
            return Err(OrchestratorError::UnknownUser(phone.to_owned()));
        }
        Ok(self.scheduler.schedule(phone, kind, cron_expr, payload, self.clock.now())?)
    }

    // ---- profile management -----------------------------------------------

    pub fn set_uploads_paused(&self, phone: &str, paused: bool) -> Result<UserProfile> {
        self.update_profile(phone, |p| {
            p.preferences.uploads_paused = paused;
            Ok(())
        })
    }

    pub fn set_thresholds(&self, phone: &str, thresholds: AlertThresholds) -> Result<UserProfile> {
        thresholds.validate()?;
        self.update_profile(phone, |p| {
            p.thresholds = thresholds;
            Ok(())
        })
    }

    fn update_profile(&self, phone: &str, f: impl FnOnce(&mut UserProfile) -> Result<()>) -> Result<UserProfile> {
        let lock = self.user_lock(phone);
        let _guard = lock.lock();
        let mut p = self
            .store
            .user(phone)
            .ok_or_else(|| OrchestratorError::UnknownUser(phone.to_owned()))?;
        f(&mut p)?;
        self.store.update_user(p.clone())?;
        Ok(p)
    }

    pub fn export_user(&self, phone: &str) -> Result<UserExport> {
        let lock = self.user_lock(phone);
        let _guard = lock.lock();
        let export = self.store.export_user(phone)?;
        self.audit(Some(phone), AuditEvent::UserExported, serde_json::Value::Null)?;
        Ok(export)
    }

    pub fn delete_user(&self, phone: &str) -> Result<()> {
        let lock = self.user_lock(phone);
        let _guard = lock.lock();
        self.store.delete_user(phone)?;
        self.seen_inbound.lock().retain(|k| k.0 != phone);
        Ok(())
    }
}

#[cfg(test)]
mod tests;
