//! Offline stand-in for the hosted interpreter model.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{parse_prompt_channels, serialize_reply, Activity, VitalEstimate, VitalSource};
use crate::dsp::{spo2_from_ratio, ActivityLabel, ActivityThresholds};
use crate::llm::{ClientError, ModelClient, ModelParams};

const FFT_LEN: usize = 4096;

/// Deterministic model stand-in that reads the channels out of the prompt and
/// answers from spectra: HR from the dominant IR frequency, SpO2 from the
/// RMS ratio of ratios, activity from movement energy, temperatures as means.
/// Like the hosted model it answers for every burst it can parse.
#[derive(Debug, Clone)]
pub struct SpectralOracleClient {
    pub ppg_rate_hz: f64,
    pub band_hz: (f64, f64),
    pub activity: ActivityThresholds,
}

impl Default for SpectralOracleClient {
    fn default() -> Self {
        SpectralOracleClient {
            ppg_rate_hz: 31.0,
            band_hz: (0.5, 3.5),
            activity: ActivityThresholds::default(),
        }
    }
}

impl SpectralOracleClient {
    /// Dominant frequency of `x` within the search band, Hz.
    pub fn dominant_frequency(&self, x: &[f64]) -> Option<f64> {
        if x.len() < 4 {
            return None;
        }
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let mut buf: Vec<Complex64> = x
            .iter()
            .map(|v| Complex64::new(v - mean, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(FFT_LEN.max(x.len()))
            .collect();
        let n = buf.len();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let df = self.ppg_rate_hz / n as f64;
        let lo = (self.band_hz.0 / df).ceil() as usize;
        let hi = ((self.band_hz.1 / df).floor() as usize).min(n / 2 - 1);
        let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
        let k = (lo.max(1)..=hi).max_by(|&a, &b| mag[a].total_cmp(&mag[b]))?;
        if mag[k] <= 1e-9 {
            return None;
        }
        let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > f64::EPSILON {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        Some((k as f64 + delta) * df)
    }

    pub fn estimate_from_prompt(&self, prompt: &str) -> Option<VitalEstimate> {
        let ch = parse_prompt_channels(prompt)?;
        let hr = self.dominant_frequency(&ch.ir).map(|f| 60.0 * f);

        let stats = |x: &[f64]| -> (f64, f64) {
            let m = x.iter().sum::<f64>() / x.len().max(1) as f64;
            let rms = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len().max(1) as f64).sqrt();
            (m, rms)
        };
        let (dc_ir, ac_ir) = stats(&ch.ir);
        let (dc_red, ac_red) = stats(&ch.red);
        let spo2 = (hr.is_some() && dc_ir > 0.0 && dc_red > 0.0 && ac_ir > 0.0)
            .then(|| spo2_from_ratio((ac_red / dc_red) / (ac_ir / dc_ir)));

        let g = self.activity.counts_per_g;
        let energy: f64 = [&ch.a_x, &ch.a_y, &ch.a_z]
            .iter()
            .map(|a| stats(a).1.powi(2) / (g * g))
            .sum();
        let label = if energy >= self.activity.walk_run_g2 {
            ActivityLabel::Run
        } else if energy >= self.activity.sit_walk_g2 {
            ActivityLabel::Walk
        } else {
            ActivityLabel::Sit
        };
        let verbose = match label {
            ActivityLabel::Sit => "The wearer appears to be resting or seated.",
            ActivityLabel::Walk => "The wearer seems to be walking at a steady pace.",
            ActivityLabel::Run => "The wearer looks to be running or exercising vigorously.",
        };
        let mean = |x: &[f64]| (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64);
        Some(VitalEstimate {
            burst_ts: 0,
            hr,
            spo2,
            activity: Some(Activity::Known(label)),
            activity_verbose: Some(verbose.to_owned()),
            temp_body: mean(&ch.body).map(|t| (t * 10.0).round() / 10.0),
            temp_ambient: mean(&ch.ambient).map(|t| (t * 10.0).round() / 10.0),
            source: VitalSource::Llm,
            clamped: Vec::new(),
        })
    }
}

impl ModelClient for SpectralOracleClient {
    fn complete(&self, prompt: &str, _params: &ModelParams) -> Result<String, ClientError> {
        self.estimate_from_prompt(prompt)
            .map(|e| serialize_reply(&e))
            .ok_or_else(|| ClientError::Rejected("prompt carries no sensor channels".into()))
    }
}

/// Reply text echoing known reference values (the evaluation oracle).
pub fn reference_reply(hr: Option<f64>, spo2: Option<f64>, activity: Option<ActivityLabel>) -> String {
    serialize_reply(&VitalEstimate {
        burst_ts: 0,
        hr,
        spo2,
        activity: activity.map(Activity::Known),
        activity_verbose: None,
        temp_body: None,
        temp_ambient: None,
        source: VitalSource::Llm,
        clamped: Vec::new(),
    })
}
