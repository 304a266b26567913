use std::sync::Arc;

use chrono::{DateTime, Utc};
use croner::Cron;
use serde::{Deserialize, Serialize};

use super::ToolError;
use crate::store::Storage;

/// A parsed 5-field cron expression (minute hour day month weekday), UTC.
#[derive(Debug, Clone)]
pub struct CronSchedule {
    expr: String,
    cron: Cron,
}

impl CronSchedule {
    pub fn parse(expr: &str) -> Result<Self, ToolError> {
        let invalid = |reason: String| ToolError::InvalidCron {
            expr: expr.to_owned(),
            reason,
        };
        if expr.split_whitespace().count() != 5 {
            return Err(invalid("expected 5 fields".into()));
        }
        let cron = Cron::new(expr).parse().map_err(|e| invalid(e.to_string()))?;
        Ok(CronSchedule {
            expr: expr.to_owned(),
            cron,
        })
    }

    pub fn expr(&self) -> &str {
        &self.expr
    }

    /// First matching instant strictly after `ts`.
    pub fn next_after(&self, ts: i64) -> Option<i64> {
        let at = DateTime::<Utc>::from_timestamp(ts, 0)?;
        self.cron.find_next_occurrence(&at, false).ok().map(|t| t.timestamp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    DailySummary,
    MedicationReminder,
    NoDataCheck,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTask {
    pub id: String,
    pub user: String,
    pub kind: TaskKind,
    pub cron_expr: String,
    pub payload: String,
    pub next_fire_ts: i64,
    #[serde(default)]
    pub last_fire_ts: Option<i64>,
}

/// One (task, scheduled instant) occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Firing {
    pub task_id: String,
    pub user: String,
    pub kind: TaskKind,
    pub payload: String,
    pub scheduled_ts: i64,
}

/// In-process cron scheduler. Time comes from the caller, so a simulated
/// clock drives it in tests; task state lives in the store so a restarted
/// scheduler resumes without repeating or skipping instants.
pub struct Scheduler {
    store: Arc<dyn Storage>,
    /// Upper bound on catch-up fires per task per tick after long downtime.
    pub max_catch_up: usize,
}

impl Scheduler {
    pub fn new(store: Arc<dyn Storage>) -> Self {
        Scheduler { store, max_catch_up: 10_000 }
    }

    /// Persists a task whose first fire is the first cron match after `now`.
    pub fn schedule(
        &self,
        user: &str,
        kind: TaskKind,
        cron_expr: &str,
        payload: &str,
        now: i64,
    ) -> Result<String, ToolError> {
        let schedule = CronSchedule::parse(cron_expr)?;
        let next = schedule.next_after(now).ok_or_else(|| ToolError::InvalidCron {
            expr: cron_expr.to_owned(),
            reason: "never fires".into(),
        })?;
        let task = ScheduledTask {
            id: uuid::Uuid::new_v4().simple().to_string(),
            user: user.to_owned(),
            kind,
            cron_expr: cron_expr.to_owned(),
            payload: payload.to_owned(),
            next_fire_ts: next,
            last_fire_ts: None,
        };
        let id = task.id.clone();
        self.store.put_task(task)?;
        Ok(id)
    }

    /// Every due instant `<= now` that has not fired yet, oldest first per
    /// task. The advanced `next_fire_ts` is persisted before returning.
    pub fn tick(&self, now: i64) -> Result<Vec<Firing>, ToolError> {
        let mut firings = Vec::new();
        for mut task in self.store.tasks() {
            if task.next_fire_ts > now {
                continue;
            }
            let schedule = CronSchedule::parse(&task.cron_expr)?;
            let mut fired = 0;
            while task.next_fire_ts <= now && fired < self.max_catch_up {
                firings.push(Firing {
                    task_id: task.id.clone(),
                    user: task.user.clone(),
                    kind: task.kind,
                    payload: task.payload.clone(),
                    scheduled_ts: task.next_fire_ts,
                });
                task.last_fire_ts = Some(task.next_fire_ts);
                task.next_fire_ts = schedule.next_after(task.next_fire_ts).unwrap_or(i64::MAX);
                fired += 1;
            }
            self.store.put_task(task)?;
        }
        firings.sort_by(|a, b| a.scheduled_ts.cmp(&b.scheduled_ts).then_with(|| a.task_id.cmp(&b.task_id)));
        Ok(firings)
    }
}
