//! Companion-app filter chain and the conventional (non-LLM) estimators.

mod activity;
mod chain;
mod estimator;
mod filter;
mod peaks;

pub use activity::{classify_activity_baseline, movement_energy_g2, ActivityLabel, ActivityThresholds};
pub use chain::{CompanionChain, ProcessedBurst};
pub use estimator::{
    availability, estimate_conventional, ratio_for_spo2, spo2_from_ratio, ConventionalEstimate,
    ConventionalEstimator, GatingConfig,
};
pub use filter::{
    apply_filter, apply_zero_phase, design_filter, moving_average, odd_extend, Biquad, FilterCoefficients,
    FilterKind, FilterSpec,
};
pub use peaks::{find_peaks, refine_peak};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie strictly inside (0, {}) Hz", sample_rate_hz / 2.0)]
    InvalidCutoff { cutoff_hz: f64, sample_rate_hz: f64 },
    #[error("filter order must be positive, got {0}")]
    InvalidOrder(u32),
    #[error("expected {expected} cutoff frequencies, got {actual}")]
    CutoffCount { expected: usize, actual: usize },
    #[error("band-pass low corner {low_hz} Hz must be below high corner {high_hz} Hz")]
    InvertedBand { low_hz: f64, high_hz: f64 },
    #[error("empty input")]
    EmptyInput,
}
