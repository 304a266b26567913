use std::f64::consts::PI;

use super::{SensorBurst, ACCEL_SAMPLES, PPG_SAMPLES, TEMP_SAMPLES};
use crate::dsp::{ratio_for_spo2, ActivityLabel};

/// Produces the raw samples for one acquisition window.
pub trait SignalSource {
    fn burst(&mut self, ts: u32, device_id: &str) -> SensorBurst;
}

impl<F: FnMut(u32, &str) -> SensorBurst> SignalSource for F {
    fn burst(&mut self, ts: u32, device_id: &str) -> SensorBurst {
        self(ts, device_id)
    }
}

/// Named physiological scenarios used by the simulator CLI and demos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VitalsPreset {
    Normal,
    HighHr,
    LowSpo2,
    Fever,
}

/// Noise-free synthetic PPG, accelerometer and temperature generator.
///
/// PPG is a fundamental at the target heart rate plus a small second
/// harmonic; the red channel amplitude is chosen so that the ratio of
/// ratios maps back to `spo2_pct` through the calibration quadratic.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    pub hr_bpm: f64,
    pub spo2_pct: f64,
    pub activity: ActivityLabel,
    pub wrist_c: f64,
    pub ambient_c: f64,
    pub ir_dc: f64,
    pub ir_ac: f64,
    pub red_dc: f64,
    pub accel_counts_per_g: f64,
    pub ppg_rate_hz: f64,
    pub accel_rate_hz: f64,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        SyntheticSource {
            hr_bpm: 72.0,
            spo2_pct: 97.0,
            activity: ActivityLabel::Sit,
            wrist_c: 33.2,
            ambient_c: 24.0,
            ir_dc: 30_000.0,
            ir_ac: 600.0,
            red_dc: 25_000.0,
            accel_counts_per_g: 4096.0,
            ppg_rate_hz: 31.0,
            accel_rate_hz: 34.0,
        }
    }
}

impl SyntheticSource {
    pub fn preset(preset: VitalsPreset) -> Self {
        let base = SyntheticSource::default();
        match preset {
            VitalsPreset::Normal => base,
            VitalsPreset::HighHr => SyntheticSource {
                hr_bpm: 150.0,
                activity: ActivityLabel::Sit,
                ..base
            },
            VitalsPreset::LowSpo2 => SyntheticSource {
                spo2_pct: 88.0,
                ..base
            },
            VitalsPreset::Fever => SyntheticSource {
                wrist_c: 38.6,
                ..base
            },
        }
    }

    fn red_ac(&self) -> f64 {
        // R = (ac_red/dc_red)/(ac_ir/dc_ir)  =>  ac_red = R * dc_red * ac_ir/dc_ir
        let r = ratio_for_spo2(self.spo2_pct).unwrap_or(0.6);
        r * self.red_dc * self.ir_ac / self.ir_dc
    }

    fn accel_motion(&self) -> (f64, f64) {
        // (frequency Hz, amplitude g) of the dominant arm swing
        match self.activity {
            ActivityLabel::Sit => (0.3, 0.01),
            ActivityLabel::Walk => (2.0, 0.5),
            ActivityLabel::Run => (3.0, 1.5),
        }
    }
}

impl SignalSource for SyntheticSource {
    fn burst(&mut self, ts: u32, device_id: &str) -> SensorBurst {
        let f = self.hr_bpm / 60.0;
        let red_ac = self.red_ac();
        let wave = |i: usize| {
            let t = i as f64 / self.ppg_rate_hz;
            (2.0 * PI * f * t).sin() + 0.2 * (4.0 * PI * f * t + 0.5).sin()
        };
        let ir = (0..PPG_SAMPLES)
            .map(|i| (self.ir_dc + self.ir_ac * wave(i)).round().clamp(0.0, 65535.0) as u16)
            .collect();
        let red = (0..PPG_SAMPLES)
            .map(|i| (self.red_dc + red_ac * wave(i)).round().clamp(0.0, 65535.0) as u16)
            .collect();

        let (mf, amp) = self.accel_motion();
        let g = self.accel_counts_per_g;
        let axis = |scale: f64, offset: f64, phase: f64| -> Vec<i16> {
            (0..ACCEL_SAMPLES)
                .map(|i| {
                    let t = i as f64 / self.accel_rate_hz;
                    let v = offset + scale * amp * g * (2.0 * PI * mf * t + phase).sin();
                    v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
                })
                .collect()
        };
        let temp = |c: f64| vec![(c * 100.0).round().clamp(0.0, 65535.0) as u16; TEMP_SAMPLES];
        SensorBurst {
            ts,
            device_id: device_id.to_owned(),
            accel_x: axis(1.0, 0.0, 0.0),
            accel_y: axis(0.0, 0.0, 0.0),
            accel_z: axis(0.0, g, 0.0),
            ir,
            red,
            temp_wrist: temp(self.wrist_c),
            temp_ambient: temp(self.ambient_c),
        }
    }
}
