//! Agent tools: cron scheduling, charts, lexical retrieval and data lookup.

mod chart;
mod lookup;
mod retrieval;
mod schedule;

pub use chart::{render_chart, ChartKind, ChartRequest, Metric, HEIGHT, MARGIN_BOTTOM, MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, WIDTH};
pub use lookup::{fire_no_data_check, latest_vitals, NO_DATA_INTERVAL_S};
pub use retrieval::{tokenize, KnowledgeIndex, KnowledgePassage, PassageSource};
pub use schedule::{CronSchedule, Firing, ScheduledTask, Scheduler, TaskKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("invalid cron expression {expr:?}: {reason}")]
    InvalidCron { expr: String, reason: String },
    #[error("no data points in the requested range")]
    NoData,
    #[error("empty time range {from}..{to}")]
    InvalidRange { from: i64, to: i64 },
    #[error("knowledge index is empty")]
    EmptyIndex,
    #[error("storage: {0}")]
    Storage(String),
}

impl From<crate::store::StoreError> for ToolError {
    fn from(e: crate::store::StoreError) -> Self {
        ToolError::Storage(e.to_string())
    }
}
