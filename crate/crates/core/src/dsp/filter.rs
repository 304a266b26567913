//! Butterworth IIR design via the bilinear transform, realised as a cascade
//! of second-order sections.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    LowPass,
    HighPass,
    BandPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// One corner for low/high-pass, `[low, high]` for band-pass.
    pub cutoff_hz: Vec<f64>,
    pub sample_rate_hz: f64,
    #[serde(default = "default_order")]
    pub order: u32,
}

fn default_order() -> u32 {
    2
}

impl FilterSpec {
    pub fn low_pass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::LowPass,
            cutoff_hz: vec![cutoff_hz],
            sample_rate_hz,
            order: 2,
        }
    }

    pub fn high_pass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::HighPass,
            cutoff_hz: vec![cutoff_hz],
            sample_rate_hz,
            order: 2,
        }
    }

    pub fn band_pass(low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::BandPass,
            cutoff_hz: vec![low_hz, high_hz],
            sample_rate_hz,
            order: 2,
        }
    }
}

/// Normalised biquad, `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    /// H(z) evaluated on the unit circle at normalised angle `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

/// A designed filter: biquads applied in sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub sections: Vec<Biquad>,
}

impl FilterCoefficients {
    pub fn identity() -> Self {
        FilterCoefficients {
            sections: vec![Biquad::IDENTITY],
        }
    }

    pub fn response_at(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(w))
    }

    pub fn gain_db(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        20.0 * self.response_at(freq_hz, sample_rate_hz).norm().log10()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .flat_map(|s| s.poles())
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }
}

fn check_cutoff(fc: f64, fs: f64) -> Result<(), DspError> {
    if !(fc > 0.0 && fc < fs / 2.0) || !fs.is_finite() {
        return Err(DspError::InvalidCutoff {
            cutoff_hz: fc,
            sample_rate_hz: fs,
        });
    }
    Ok(())
}

/// Q factors of the conjugate pole pairs of an order-`n` Butterworth prototype.
fn butterworth_qs(order: u32) -> Vec<f64> {
    let n = f64::from(order);
    (1..=order / 2)
        .map(|k| 1.0 / (2.0 * (PI * (2.0 * f64::from(k) - 1.0) / (2.0 * n)).sin()))
        .collect()
}

fn second_order(high: bool, k: f64, q: f64) -> Biquad {
    let k2 = k * k;
    let norm = 1.0 / (1.0 + k / q + k2);
    let a1 = 2.0 * (k2 - 1.0) * norm;
    let a2 = (1.0 - k / q + k2) * norm;
    if high {
        Biquad {
            b0: norm,
            b1: -2.0 * norm,
            b2: norm,
            a1,
            a2,
        }
    } else {
        let b0 = k2 * norm;
        Biquad {
            b0,
            b1: 2.0 * b0,
            b2: b0,
            a1,
            a2,
        }
    }
}

fn first_order(high: bool, k: f64) -> Biquad {
    let norm = 1.0 / (1.0 + k);
    let a1 = (k - 1.0) * norm;
    if high {
        Biquad {
            b0: norm,
            b1: -norm,
            b2: 0.0,
            a1,
            a2: 0.0,
        }
    } else {
        Biquad {
            b0: k * norm,
            b1: k * norm,
            b2: 0.0,
            a1,
            a2: 0.0,
        }
    }
}

fn butterworth(high: bool, fc: f64, fs: f64, order: u32) -> Vec<Biquad> {
    // prewarped analog corner
    let k = (PI * fc / fs).tan();
    let mut sections: Vec<Biquad> = butterworth_qs(order)
        .into_iter()
        .map(|q| second_order(high, k, q))
        .collect();
    if order % 2 == 1 {
        sections.push(first_order(high, k));
    }
    sections
}

/// Designs a Butterworth filter. Band-pass is a high-pass at the lower corner
/// cascaded with a low-pass at the upper one, each of the requested order.
pub fn design_filter(spec: &FilterSpec) -> Result<FilterCoefficients, DspError> {
    let fs = spec.sample_rate_hz;
    if spec.order == 0 {
        return Err(DspError::InvalidOrder(spec.order));
    }
    let expected = if spec.kind == FilterKind::BandPass { 2 } else { 1 };
    if spec.cutoff_hz.len() != expected {
        return Err(DspError::CutoffCount {
            expected,
            actual: spec.cutoff_hz.len(),
        });
    }
    for &fc in &spec.cutoff_hz {
        check_cutoff(fc, fs)?;
    }
    let sections = match spec.kind {
        FilterKind::LowPass => butterworth(false, spec.cutoff_hz[0], fs, spec.order),
        FilterKind::HighPass => butterworth(true, spec.cutoff_hz[0], fs, spec.order),
        FilterKind::BandPass => {
            let (lo, hi) = (spec.cutoff_hz[0], spec.cutoff_hz[1]);
            if lo >= hi {
                return Err(DspError::InvertedBand { low_hz: lo, high_hz: hi });
            }
            let mut s = butterworth(true, lo, fs, spec.order);
            s.extend(butterworth(false, hi, fs, spec.order));
            s
        }
    };
    Ok(FilterCoefficients { sections })
}

/// Causal filtering, transposed direct form II, zero initial state.
pub fn apply_filter(coeffs: &FilterCoefficients, samples: &[f64]) -> Vec<f64> {
    let mut out = samples.to_vec();
    for s in &coeffs.sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for x in out.iter_mut() {
            let y = s.b0 * *x + z1;
            z1 = s.b1 * *x - s.a1 * y + z2;
            z2 = s.b2 * *x - s.a2 * y;
            *x = y;
        }
    }
    out
}

/// Forward-backward filtering: zero phase, squared magnitude response.
/// The input is odd-extended at both ends before filtering to suppress
/// start-up transients, then trimmed back to its original length.
pub fn apply_zero_phase(coeffs: &FilterCoefficients, samples: &[f64]) -> Vec<f64> {
    let pad = (3 * (2 * coeffs.sections.len() + 1)).min(samples.len().saturating_sub(1));
    let ext = odd_extend(samples, pad);
    let mut fwd = apply_filter(coeffs, &ext);
    fwd.reverse();
    let mut back = apply_filter(coeffs, &fwd);
    back.reverse();
    back[pad..pad + samples.len()].to_vec()
}

/// Point-symmetric extension about each endpoint: `2 x[0] - x[k]` on the
/// left, `2 x[n-1] - x[n-1-k]` on the right.
pub fn odd_extend(samples: &[f64], pad: usize) -> Vec<f64> {
    let n = samples.len();
    let pad = pad.min(n.saturating_sub(1));
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|k| 2.0 * samples[0] - samples[k]));
    out.extend_from_slice(samples);
    out.extend((1..=pad).map(|k| 2.0 * samples[n - 1] - samples[n - 1 - k]));
    out
}

/// Centered moving average, window truncated at the edges.
pub fn moving_average(samples: &[f64], window: usize) -> Vec<f64> {
    let n = samples.len();
    if n == 0 || window <= 1 {
        return samples.to_vec();
    }
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &x in samples {
        prefix.push(prefix.last().unwrap() + x);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + window - half).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}
