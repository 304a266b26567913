use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{AuditEvent, AuditRecord, CostEntry, Storage, StoreError, UserExport};
use crate::delivery::ChatEnvelope;
use crate::interpreter::VitalEstimate;
use crate::orchestrator::{MemoryEvent, UserProfile};
use crate::tools::ScheduledTask;

const JOURNAL: &str = "journal.jsonl";
const AUDIT: &str = "audit.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Entry {
    User { profile: UserProfile },
    Vital { user: String, estimate: VitalEstimate },
    Message { envelope: ChatEnvelope },
    Memory { event: MemoryEvent },
    Task { task: ScheduledTask },
    Cost { entry: CostEntry },
    DeleteUser { user: String },
}

#[derive(Default)]
struct State {
    users: BTreeMap<String, UserProfile>,
    vitals: HashMap<String, Vec<VitalEstimate>>,
    messages: HashMap<String, Vec<ChatEnvelope>>,
    memory: HashMap<String, Vec<MemoryEvent>>,
    tasks: BTreeMap<String, ScheduledTask>,
    costs: Vec<CostEntry>,
    audit: Vec<AuditRecord>,
}

impl State {
    fn apply(&mut self, entry: Entry) {
        match entry {
            Entry::User { profile } => {
                self.users.insert(profile.phone.clone(), profile);
            }
            Entry::Vital { user, estimate } => {
                let list = self.vitals.entry(user).or_default();
                // Sorted by timestamp; equal timestamps keep insertion order.
                let at = list.partition_point(|v| v.burst_ts <= estimate.burst_ts);
                list.insert(at, estimate);
            }
            Entry::Message { envelope } => {
                self.messages.entry(envelope.user_phone.clone()).or_default().push(envelope)
            }
            Entry::Memory { event } => self.memory.entry(event.user.clone()).or_default().push(event),
            Entry::Task { task } => {
                self.tasks.insert(task.id.clone(), task);
            }
            Entry::Cost { entry } => self.costs.push(entry),
            Entry::DeleteUser { user } => self.remove_user(&user),
        }
    }

    fn remove_user(&mut self, user: &str) {
        self.users.remove(user);
        self.vitals.remove(user);
        self.messages.remove(user);
        self.memory.remove(user);
        self.tasks.retain(|_, t| t.user != user);
        self.costs.retain(|c| c.user.as_deref() != Some(user));
        self.audit.retain(|a| a.user.as_deref() != Some(user));
    }

    /// Entries that rebuild the current state from scratch.
    fn snapshot(&self) -> Vec<Entry> {
        let mut out: Vec<Entry> = self
            .users
            .values()
            .map(|p| Entry::User { profile: p.clone() })
            .collect();
        let mut users: Vec<&String> = self.vitals.keys().chain(self.messages.keys()).chain(self.memory.keys()).collect();
        users.sort();
        users.dedup();
        for u in users {
            for v in self.vitals.get(u).into_iter().flatten() {
                out.push(Entry::Vital { user: u.clone(), estimate: v.clone() });
            }
            for m in self.messages.get(u).into_iter().flatten() {
                out.push(Entry::Message { envelope: m.clone() });
            }
            for e in self.memory.get(u).into_iter().flatten() {
                out.push(Entry::Memory { event: e.clone() });
            }
        }
        out.extend(self.tasks.values().map(|t| Entry::Task { task: t.clone() }));
        out.extend(self.costs.iter().map(|c| Entry::Cost { entry: c.clone() }));
        out
    }
}

struct Files {
    dir: PathBuf,
    journal: File,
    audit: File,
}

fn append_line<T: Serialize>(file: &mut File, value: &T) -> Result<(), StoreError> {
    let mut line = serde_json::to_vec(value).expect("journal records serialize");
    line.push(b'\n');
    file.write_all(&line)?;
    Ok(())
}

fn open_append(path: &Path) -> std::io::Result<File> {
    OpenOptions::new().create(true).append(true).open(path)
}

/// Reads a JSONL file. A final line without a newline that fails to parse is
/// a torn write from a crash and is dropped; any other bad line is an error.
fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let raw = fs::read(path)?;
    let complete = raw.ends_with(b"\n");
    let lines: Vec<String> = BufReader::new(raw.as_slice()).lines().collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => {
                return Err(StoreError::Corrupt {
                    file: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn rewrite<T: Serialize>(path: &Path, items: &[T]) -> Result<File, StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        for item in items {
            append_line(&mut f, item)?;
        }
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(open_append(path)?)
}

struct Inner {
    state: State,
    files: Option<Files>,
}

/// In-memory tables with an optional JSONL journal on disk.
pub struct JournalStore {
    inner: RwLock<Inner>,
}

impl JournalStore {
    pub fn in_memory() -> Self {
        JournalStore {
            inner: RwLock::new(Inner {
                state: State::default(),
                files: None,
            }),
        }
    }

    /// Opens (or creates) a store in `dir`, replaying `journal.jsonl` and
    /// `audit.jsonl`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut state = State::default();
        for entry in read_lines::<Entry>(&dir.join(JOURNAL))? {
            state.apply(entry);
        }
        state.audit = read_lines(&dir.join(AUDIT))?;
        // Drop any torn tail so new appends start on a clean line.
        let journal = rewrite(&dir.join(JOURNAL), &state.snapshot())?;
        let audit = rewrite(&dir.join(AUDIT), &state.audit)?;
        Ok(JournalStore {
            inner: RwLock::new(Inner {
                state,
                files: Some(Files { dir, journal, audit }),
            }),
        })
    }

    fn write(&self, entry: Entry) -> Result<(), StoreError> {
        let mut inner = self.inner.write();
        if let Some(files) = inner.files.as_mut() {
            append_line(&mut files.journal, &entry)?;
        }
        inner.state.apply(entry);
        Ok(())
    }

    fn require_user(&self, user: &str) -> Result<(), StoreError> {
        if self.inner.read().state.users.contains_key(user) {
            Ok(())
        } else {
            Err(StoreError::UnknownUser(user.to_owned()))
        }
    }
}

impl Storage for JournalStore {
    fn insert_user(&self, profile: UserProfile) -> Result<(), StoreError> {
        let mut inner = self.inner.write();
        if inner.state.users.contains_key(&profile.phone) {
            return Err(StoreError::DuplicatePhone(profile.phone));
        }
        let entry = Entry::User { profile };
        if let Some(files) = inner.files.as_mut() {
            append_line(&mut files.journal, &entry)?;
        }
        inner.state.apply(entry);
        Ok(())
    }

    fn update_user(&self, profile: UserProfile) -> Result<(), StoreError> {
        self.require_user(&profile.phone)?;
        self.write(Entry::User { profile })
    }

    fn user(&self, phone: &str) -> Option<UserProfile> {
        self.inner.read().state.users.get(phone).cloned()
    }

    fn user_by_device(&self, device_id: &str) -> Option<UserProfile> {
        self.inner.read().state.users.values().find(|u| u.device_id == device_id).cloned()
    }

    fn user_by_token(&self, token: &str) -> Option<UserProfile> {
        self.inner.read().state.users.values().find(|u| u.token == token).cloned()
    }

    fn users(&self) -> Vec<UserProfile> {
        self.inner.read().state.users.values().cloned().collect()
    }

    fn put_vital(&self, user: &str, estimate: VitalEstimate) -> Result<(), StoreError> {
        self.require_user(user)?;
        self.write(Entry::Vital { user: user.to_owned(), estimate })
    }

    fn has_vital(&self, user: &str, burst_ts: i64) -> bool {
        self.inner
            .read()
            .state
            .vitals
            .get(user)
            .is_some_and(|l| l.iter().any(|v| v.burst_ts == burst_ts))
    }

    fn vitals(&self, user: &str, from: i64, to: i64) -> Vec<VitalEstimate> {
        let inner = self.inner.read();
        let Some(list) = inner.state.vitals.get(user) else {
            return Vec::new();
        };
        let lo = list.partition_point(|v| v.burst_ts < from);
        let hi = list.partition_point(|v| v.burst_ts <= to);
        list[lo..hi.max(lo)].to_vec()
    }

    fn recent_vitals(&self, user: &str, n: usize) -> Vec<VitalEstimate> {
        let inner = self.inner.read();
        let list = inner.state.vitals.get(user).map(Vec::as_slice).unwrap_or_default();
        list[list.len().saturating_sub(n)..].to_vec()
    }

    fn append_message(&self, envelope: ChatEnvelope) -> Result<(), StoreError> {
        self.write(Entry::Message { envelope })
    }

    fn messages(&self, user: &str, n: usize) -> Vec<ChatEnvelope> {
        let inner = self.inner.read();
        let list = inner.state.messages.get(user).map(Vec::as_slice).unwrap_or_default();
        list[list.len().saturating_sub(n)..].to_vec()
    }

    fn append_memory(&self, event: MemoryEvent) -> Result<(), StoreError> {
        self.require_user(&event.user)?;
        self.write(Entry::Memory { event })
    }

    fn memory(&self, user: &str) -> Vec<MemoryEvent> {
        self.inner.read().state.memory.get(user).cloned().unwrap_or_default()
    }

    fn put_task(&self, task: ScheduledTask) -> Result<(), StoreError> {
        self.write(Entry::Task { task })
    }

    fn tasks(&self) -> Vec<ScheduledTask> {
        self.inner.read().state.tasks.values().cloned().collect()
    }

    fn record_cost(&self, entry: CostEntry) -> Result<(), StoreError> {
        self.write(Entry::Cost { entry })
    }

    fn costs(&self) -> Vec<CostEntry> {
        self.inner.read().state.costs.clone()
    }

    fn audit(&self, mut record: AuditRecord) -> Result<u64, StoreError> {
        let mut inner = self.inner.write();
        record.seq = inner.state.audit.last().map_or(1, |r| r.seq + 1);
        if let Some(files) = inner.files.as_mut() {
            append_line(&mut files.audit, &record)?;
        }
        let seq = record.seq;
        inner.state.audit.push(record);
        Ok(seq)
    }

    fn audit_log(&self) -> Vec<AuditRecord> {
        self.inner.read().state.audit.clone()
    }

    fn export_user(&self, user: &str) -> Result<UserExport, StoreError> {
        let inner = self.inner.read();
        let s = &inner.state;
        let profile = s.users.get(user).cloned().ok_or_else(|| StoreError::UnknownUser(user.to_owned()))?;
        Ok(UserExport {
            profile,
            vitals: s.vitals.get(user).cloned().unwrap_or_default(),
            messages: s.messages.get(user).cloned().unwrap_or_default(),
            memory: s.memory.get(user).cloned().unwrap_or_default(),
            tasks: s.tasks.values().filter(|t| t.user == user).cloned().collect(),
            costs: s.costs.iter().filter(|c| c.user.as_deref() == Some(user)).cloned().collect(),
            audit: s.audit.iter().filter(|a| a.user.as_deref() == Some(user)).cloned().collect(),
        })
    }

    fn delete_user(&self, user: &str) -> Result<(), StoreError> {
        let mut inner = self.inner.write();
        if !inner.state.users.contains_key(user) {
            return Err(StoreError::UnknownUser(user.to_owned()));
        }
        inner.state.remove_user(user);
        let ts = chrono::Utc::now().timestamp();
        let seq = inner.state.audit.last().map_or(1, |r| r.seq + 1);
        let mut record = AuditRecord::new(ts, None, AuditEvent::UserDeleted, serde_json::Value::Null);
        record.seq = seq;
        inner.state.audit.push(record);
        // Compact so the deleted user's lines are gone from disk too.
        let Inner { state, files } = &mut *inner;
        if let Some(files) = files.as_mut() {
            files.journal = rewrite(&files.dir.join(JOURNAL), &state.snapshot())?;
            files.audit = rewrite(&files.dir.join(AUDIT), &state.audit)?;
        }
        Ok(())
    }
}
