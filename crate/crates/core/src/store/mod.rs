//! Persistence behind the [`Storage`] trait. The bundled implementation keeps
//! everything in memory and, when opened on a directory, mirrors writes to an
//! append-only JSONL journal that is replayed on start.

mod journal;

use serde::{Deserialize, Serialize};

pub use journal::JournalStore;

use crate::delivery::ChatEnvelope;
use crate::interpreter::VitalEstimate;
use crate::orchestrator::{MemoryEvent, UserProfile};
use crate::router::CostRecord;
use crate::tools::ScheduledTask;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("phone {0} is already registered")]
    DuplicatePhone(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("storage i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("journal {file} line {line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditEvent {
    Signup,
    Welcome,
    SensorBurst,
    UrgentDraft,
    QcReview,
    UrgentDelivered,
    UrgentSuppressed,
    UserFlow,
    SchemaRetry,
    SchemaFallback,
    ScheduledFire,
    UserExported,
    UserDeleted,
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    /// Assigned by the store, strictly increasing.
    #[serde(default)]
    pub seq: u64,
    pub ts: i64,
    pub user: Option<String>,
    pub event: AuditEvent,
    #[serde(default)]
    pub detail: serde_json::Value,
}

impl AuditRecord {
    pub fn new(ts: i64, user: Option<&str>, event: AuditEvent, detail: serde_json::Value) -> Self {
        AuditRecord {
            seq: 0,
            ts,
            user: user.map(str::to_owned),
            event,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub user: Option<String>,
    pub ts: i64,
    pub record: CostRecord,
}

/// Everything stored about one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserExport {
    pub profile: UserProfile,
    pub vitals: Vec<VitalEstimate>,
    pub messages: Vec<ChatEnvelope>,
    pub memory: Vec<MemoryEvent>,
    pub tasks: Vec<ScheduledTask>,
    pub costs: Vec<CostEntry>,
    pub audit: Vec<AuditRecord>,
}

/// Safe for concurrent readers; writes are serialized internally.
pub trait Storage: Send + Sync {
    fn insert_user(&self, profile: UserProfile) -> Result<(), StoreError>;
    fn update_user(&self, profile: UserProfile) -> Result<(), StoreError>;
    fn user(&self, phone: &str) -> Option<UserProfile>;
    fn user_by_device(&self, device_id: &str) -> Option<UserProfile>;
    fn user_by_token(&self, token: &str) -> Option<UserProfile>;
    fn users(&self) -> Vec<UserProfile>;

    fn put_vital(&self, user: &str, estimate: VitalEstimate) -> Result<(), StoreError>;
    fn has_vital(&self, user: &str, burst_ts: i64) -> bool;
    /// Estimates with `from <= burst_ts <= to`, ordered by timestamp then
    /// insertion.
    fn vitals(&self, user: &str, from: i64, to: i64) -> Vec<VitalEstimate>;
    /// The last `n` estimates in timestamp order.
    fn recent_vitals(&self, user: &str, n: usize) -> Vec<VitalEstimate>;

    fn append_message(&self, envelope: ChatEnvelope) -> Result<(), StoreError>;
    /// The last `n` messages for the user, oldest first.
    fn messages(&self, user: &str, n: usize) -> Vec<ChatEnvelope>;

    fn append_memory(&self, event: MemoryEvent) -> Result<(), StoreError>;
    fn memory(&self, user: &str) -> Vec<MemoryEvent>;

    fn put_task(&self, task: ScheduledTask) -> Result<(), StoreError>;
    fn tasks(&self) -> Vec<ScheduledTask>;

    fn record_cost(&self, entry: CostEntry) -> Result<(), StoreError>;
    fn costs(&self) -> Vec<CostEntry>;

    fn audit(&self, record: AuditRecord) -> Result<u64, StoreError>;
    fn audit_log(&self) -> Vec<AuditRecord>;

    fn export_user(&self, user: &str) -> Result<UserExport, StoreError>;
    /// Removes every record tied to the user, including from disk.
    fn delete_user(&self, user: &str) -> Result<(), StoreError>;
}
