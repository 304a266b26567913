use serde::{Deserialize, Serialize};

use super::{
    apply_zero_phase, design_filter, find_peaks, moving_average, odd_extend, refine_peak, DspError,
    FilterCoefficients, FilterSpec,
};
use crate::wire::SensorBurst;

const SPO2_A: f64 = -45.060;
const SPO2_B: f64 = 30.354;
const SPO2_C: f64 = 94.845;

/// Maxim reference-design calibration, clamped to [70, 100] %.
pub fn spo2_from_ratio(r: f64) -> f64 {
    (SPO2_A * r * r + SPO2_B * r + SPO2_C).clamp(70.0, 100.0)
}

/// Inverse of the calibration on its decreasing branch (R right of the
/// vertex). `None` when the saturation is above the curve's maximum.
pub fn ratio_for_spo2(spo2: f64) -> Option<f64> {
    // SPO2_A r^2 + SPO2_B r + (SPO2_C - spo2) = 0
    let c = SPO2_C - spo2;
    let disc = SPO2_B * SPO2_B - 4.0 * SPO2_A * c;
    if disc < 0.0 {
        return None;
    }
    Some((-SPO2_B - disc.sqrt()) / (2.0 * SPO2_A))
}

/// Quality-gating and pipeline parameters of the conventional estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatingConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub filter_order: u32,
    /// Moving-average window used for DC removal.
    pub dc_window_s: f64,
    pub min_peaks: usize,
    pub hr_min_bpm: f64,
    pub hr_max_bpm: f64,
    /// Minimum raw DC level on either PPG channel.
    pub dc_floor: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Peak prominence threshold as a fraction of the window's AC peak-to-peak.
    pub prominence_fraction: f64,
    /// Minimum peak spacing is `sample_rate / max_rate_divisor` samples.
    pub max_rate_divisor: f64,
    /// Samples this close to either window edge are excluded from peak
    /// search and amplitude measurement (filter edge effects).
    pub edge_guard_s: f64,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig {
            band_low_hz: 0.5,
            band_high_hz: 2.5,
            filter_order: 2,
            dc_window_s: 1.0,
            min_peaks: 2,
            hr_min_bpm: 40.0,
            // 180 BPM plus the estimator's 3 BPM tolerance at the top of the band
            hr_max_bpm: 183.0,
            dc_floor: 1000.0,
            ratio_min: 0.3,
            ratio_max: 1.1,
            prominence_fraction: 0.25,
            max_rate_divisor: 3.0,
            edge_guard_s: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalEstimate {
    pub hr_bpm: Option<f64>,
    pub spo2_pct: Option<f64>,
    pub hr_valid: bool,
    pub spo2_valid: bool,
    pub peak_indices: Vec<usize>,
    pub ratio_r: Option<f64>,
}

impl ConventionalEstimate {
    pub fn is_available(&self) -> bool {
        self.hr_valid && self.spo2_valid
    }
}

/// DC removal, band-pass, IR peak detection and ratio-of-ratios SpO2 with
/// quality gating. Stateless after construction.
#[derive(Debug, Clone)]
pub struct ConventionalEstimator {
    gating: GatingConfig,
    sample_rate_hz: f64,
    band_pass: FilterCoefficients,
}

impl ConventionalEstimator {
    pub fn new(gating: GatingConfig, sample_rate_hz: f64) -> Result<Self, DspError> {
        let band_pass = design_filter(&FilterSpec {
            order: gating.filter_order,
            ..FilterSpec::band_pass(gating.band_low_hz, gating.band_high_hz, sample_rate_hz)
        })?;
        Ok(ConventionalEstimator {
            gating,
            sample_rate_hz,
            band_pass,
        })
    }

    pub fn gating(&self) -> &GatingConfig {
        &self.gating
    }

    pub fn estimate(&self, burst: &SensorBurst) -> ConventionalEstimate {
        let ir: Vec<f64> = burst.ir.iter().map(|&v| f64::from(v)).collect();
        let red: Vec<f64> = burst.red.iter().map(|&v| f64::from(v)).collect();
        self.estimate_channels(&ir, &red)
    }

    pub fn estimate_channels(&self, ir: &[f64], red: &[f64]) -> ConventionalEstimate {
        let g = &self.gating;
        let fs = self.sample_rate_hz;
        let invalid = ConventionalEstimate {
            hr_bpm: None,
            spo2_pct: None,
            hr_valid: false,
            spo2_valid: false,
            peak_indices: Vec::new(),
            ratio_r: None,
        };
        if ir.is_empty() || red.is_empty() {
            return invalid;
        }

        let window = (g.dc_window_s * fs).round().max(1.0) as usize;
        let ac = |x: &[f64]| -> Vec<f64> {
            let pad = (window / 2).min(x.len().saturating_sub(1));
            let dc = moving_average(&odd_extend(x, pad), window);
            let detrended: Vec<f64> = x.iter().zip(&dc[pad..]).map(|(v, d)| v - d).collect();
            apply_zero_phase(&self.band_pass, &detrended)
        };
        let ir_ac = ac(ir);
        let red_ac = ac(red);

        let guard = ((g.edge_guard_s * fs).round() as usize).min((ir_ac.len().saturating_sub(3)) / 2);
        let interior = &ir_ac[guard..ir_ac.len() - guard];
        let (lo, hi) = interior
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let p2p = hi - lo;
        let min_distance = (fs / g.max_rate_divisor).floor().max(1.0) as usize;
        let peaks = if p2p > 0.0 {
            find_peaks(interior, min_distance, g.prominence_fraction * p2p)
                .into_iter()
                .map(|p| p + guard)
                .collect()
        } else {
            Vec::new()
        };

        let hr = (peaks.len() >= 2).then(|| 60.0 * fs / mean_interval(&ir_ac, &peaks));
        let hr_valid = peaks.len() >= g.min_peaks
            && hr.is_some_and(|h| h.is_finite() && h >= g.hr_min_bpm && h <= g.hr_max_bpm);

        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let (dc_ir, dc_red) = (mean(ir), mean(red));
        let (ac_ir, ac_red) = (rms(interior), rms(&red_ac[guard..red_ac.len() - guard]));
        let ratio = (dc_ir > 0.0 && dc_red > 0.0 && ac_ir > 0.0)
            .then(|| (ac_red / dc_red) / (ac_ir / dc_ir))
            .filter(|r| r.is_finite());
        let spo2_valid = peaks.len() >= g.min_peaks
            && dc_ir >= g.dc_floor
            && dc_red >= g.dc_floor
            && ratio.is_some_and(|r| r >= g.ratio_min && r <= g.ratio_max);

        ConventionalEstimate {
            hr_bpm: hr.filter(|_| hr_valid),
            spo2_pct: ratio.filter(|_| spo2_valid).map(spo2_from_ratio),
            hr_valid,
            spo2_valid,
            peak_indices: peaks,
            ratio_r: ratio,
        }
    }
}

/// Mean beat-to-beat interval in samples: the least-squares slope of refined
/// peak position against beat number. With two peaks this is their distance;
/// with more it is less sensitive to the outermost peaks than (last-first)/(n-1).
fn mean_interval(x: &[f64], peaks: &[usize]) -> f64 {
    let pos: Vec<f64> = peaks.iter().map(|&p| refine_peak(x, p)).collect();
    let n = pos.len() as f64;
    let k_mean = (n - 1.0) / 2.0;
    let p_mean = pos.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, p) in pos.iter().enumerate() {
        let dk = k as f64 - k_mean;
        num += dk * (p - p_mean);
        den += dk * dk;
    }
    num / den
}

/// Conventional estimate with default gating at the band's 31 Hz PPG rate.
pub fn estimate_conventional(burst: &SensorBurst) -> ConventionalEstimate {
    ConventionalEstimator::new(GatingConfig::default(), 31.0)
        .expect("default band-pass is valid at 31 Hz")
        .estimate(burst)
}

/// Percentage of results with both HR and SpO2 valid.
pub fn availability(results: &[ConventionalEstimate]) -> Result<f64, DspError> {
    if results.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let valid = results.iter().filter(|r| r.is_available()).count();
    Ok(100.0 * valid as f64 / results.len() as f64)
}
