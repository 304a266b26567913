//! Rate conversion and 4-second windowing of ingested recordings.

use super::{DatasetLayout, EvalError, ReferenceRecord};
use crate::dsp::ActivityLabel;
use crate::wire::{SensorBurst, ACCEL_SAMPLES, PPG_SAMPLES, TEMP_SAMPLES};

/// Window length of one burst.
pub const WINDOW_S: f64 = 4.0;
/// Band PPG rate: 124 samples per window.
pub const PPG_RATE_HZ: f64 = PPG_SAMPLES as f64 / WINDOW_S;
/// Band accelerometer rate: 136 samples per window.
pub const ACCEL_RATE_HZ: f64 = ACCEL_SAMPLES as f64 / WINDOW_S;

/// Linear-interpolation resampler. Output sample `k` is the input
/// interpolated at time `k / fs_out`, for every such time inside the input
/// span `[0, (n-1) / fs_in]`.
pub fn downsample(signal: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>, EvalError> {
    if !(fs_out > 0.0 && fs_in >= fs_out && fs_in.is_finite()) {
        return Err(EvalError::InvalidRate { fs_in, fs_out });
    }
    let Some(last) = signal.len().checked_sub(1) else {
        return Ok(Vec::new());
    };
    let len = (last as f64 * fs_out / fs_in).floor() as usize + 1;
    Ok((0..len)
        .map(|k| {
            let pos = k as f64 * fs_in / fs_out;
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            if frac == 0.0 || i == last {
                signal[i]
            } else {
                signal[i] + frac * (signal[i + 1] - signal[i])
            }
        })
        .collect())
}

/// Resamples then pins the length to `n`, repeating the last sample when a
/// window is a sample short (or zero when empty).
fn resample_exact(window: &[f64], fs_in: f64, fs_out: f64, n: usize) -> Result<Vec<f64>, EvalError> {
    let mut out = downsample(window, fs_in, fs_out)?;
    let pad = out.last().copied().unwrap_or(0.0);
    out.resize(n, pad);
    Ok(out)
}

/// One evaluable window with its references.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSegment {
    pub subject_id: u32,
    pub recording: String,
    pub window: usize,
    pub burst: SensorBurst,
    /// Means of the reference series over the window.
    pub hr_ref: Option<f64>,
    pub spo2_ref: Option<f64>,
    pub activity_ref: Option<ActivityLabel>,
}

fn mean_present(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Non-overlapping 4 s windows; a trailing partial window is dropped.
pub fn segment(record: &ReferenceRecord, layout: &DatasetLayout) -> Result<Vec<EvalSegment>, EvalError> {
    let ppg_per = (WINDOW_S * record.fs_ppg).round() as usize;
    let accel_per = (WINDOW_S * record.fs_accel).round() as usize;
    if ppg_per == 0 || accel_per == 0 {
        return Err(EvalError::InvalidRate {
            fs_in: record.fs_ppg,
            fs_out: PPG_RATE_HZ,
        });
    }
    let windows = record.ppg_ir.len() / ppg_per;
    let device_id: String = record.label().chars().take(crate::wire::DEVICE_ID_LEN).collect();
    let to_u16 = |v: f64| v.round().clamp(0.0, f64::from(u16::MAX)) as u16;
    let to_i16 = |g: f64| (g * layout.counts_per_g).round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16;
    let temp = |c: f64| vec![to_u16(c * 100.0); TEMP_SAMPLES];

    let mut out = Vec::with_capacity(windows);
    for w in 0..windows {
        let ppg = w * ppg_per..(w + 1) * ppg_per;
        let ir = resample_exact(&record.ppg_ir[ppg.clone()], record.fs_ppg, PPG_RATE_HZ, PPG_SAMPLES)?;
        let red = resample_exact(&record.ppg_red[ppg.clone()], record.fs_ppg, PPG_RATE_HZ, PPG_SAMPLES)?;
        let mut accel: [Vec<i16>; 3] = Default::default();
        for (axis, series) in record.accel.iter().enumerate() {
            let start = (w * accel_per).min(series.len());
            let end = ((w + 1) * accel_per).min(series.len());
            accel[axis] = resample_exact(&series[start..end], record.fs_accel, ACCEL_RATE_HZ, ACCEL_SAMPLES)?
                .into_iter()
                .map(to_i16)
                .collect();
        }
        let [accel_x, accel_y, accel_z] = accel;
        out.push(EvalSegment {
            subject_id: record.subject_id,
            recording: record.recording.clone(),
            window: w,
            burst: SensorBurst {
                ts: (w as f64 * WINDOW_S) as u32,
                device_id: device_id.clone(),
                accel_x,
                accel_y,
                accel_z,
                ir: ir.into_iter().map(to_u16).collect(),
                red: red.into_iter().map(to_u16).collect(),
                temp_wrist: temp(layout.wrist_temp_c),
                temp_ambient: temp(layout.ambient_temp_c),
            },
            hr_ref: mean_present(&record.hr_ref[ppg.clone()]),
            spo2_ref: mean_present(&record.spo2_ref[ppg]),
            activity_ref: record.activity,
        });
    }
    Ok(out)
}
