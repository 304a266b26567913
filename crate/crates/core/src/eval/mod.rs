//! Offline evaluation: replays recorded PPG/accelerometer data through the
//! conventional chain and the model path, and prices query sets through the
//! router.
//!
//! Pipeline: [`ingest`] -> [`segment`] -> [`run_comparison`] ->
//! [`ComparisonReport::write`]. [`evaluate_dataset`] chains all of it.

mod compare;
mod cost;
mod dataset;
mod metrics;
mod signal;

use std::path::{Path, PathBuf};

pub use compare::{
    reference_echo_client, run_comparison, ComparisonConfig, ComparisonReport, ErrorDensity, EvalRow,
    MethodMetrics, MethodReference, PublishedReference, SubjectDelta,
};
pub use cost::{bundled_queries, parse_queries, run_cost_study, CostStudyReport, PublishedCost};
pub use dataset::{ingest, write_synthetic_dataset, DatasetLayout, ReferenceRecord, SyntheticSpec};
pub use metrics::{confusion, mae, Confusion, Histogram};
pub use signal::{downsample, segment, EvalSegment, ACCEL_RATE_HZ, PPG_RATE_HZ, WINDOW_S};

use crate::exec::{map_ordered, Execution};
use crate::llm::ModelClient;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("missing dataset file: {0}")]
    MissingFile(PathBuf),
    #[error("{file}: {reason}")]
    SchemaMismatch { file: PathBuf, reason: String },
    #[error("invalid sampling rates: {fs_in} Hz -> {fs_out} Hz")]
    InvalidRate { fs_in: f64, fs_out: f64 },
    #[error("mask selects no entries")]
    EmptyMask,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no evaluable 4 s windows in the dataset")]
    NoSegments,
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

/// Segments every record, keeping record order then window order.
pub fn segment_all(
    records: &[ReferenceRecord],
    layout: &DatasetLayout,
    exec: Execution,
) -> Result<Vec<EvalSegment>, EvalError> {
    let per_record = map_ordered(exec, records, |r| segment(r, layout));
    let mut out = Vec::new();
    for segs in per_record {
        out.extend(segs?);
    }
    Ok(out)
}

/// Ingests `dir`, segments it and runs both paths.
pub fn evaluate_dataset(
    dir: &Path,
    layout: &DatasetLayout,
    client: &dyn ModelClient,
    config: &ComparisonConfig,
    exec: Execution,
) -> Result<ComparisonReport, EvalError> {
    let records = ingest(dir, layout)?;
    let segments = segment_all(&records, layout, exec)?;
    run_comparison(&segments, client, config, exec)
}
