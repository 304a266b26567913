use serde::{Deserialize, Serialize};

use super::{apply_zero_phase, design_filter, moving_average, DspError, FilterCoefficients, FilterSpec};
use crate::wire::{DeviceConfig, SensorBurst};

/// A burst after the companion app's smoothing, in physical-ish units
/// (PPG counts, accelerometer counts, degrees Celsius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedBurst {
    pub ts: u32,
    pub ir: Vec<f64>,
    pub red: Vec<f64>,
    pub accel_x: Vec<f64>,
    pub accel_y: Vec<f64>,
    pub accel_z: Vec<f64>,
    pub temp_wrist: Vec<f64>,
    pub temp_ambient: Vec<f64>,
}

/// PPG band-pass 0.5-2.5 Hz, accelerometer high-pass 0.2 Hz, and temperature
/// smoothing.
///
/// The 3 Hz temperature low-pass cannot be realised at a 1 Hz sample rate
/// (its corner sits above Nyquist); when design fails the chain falls back
/// to a 3-point moving average.
#[derive(Debug, Clone)]
pub struct CompanionChain {
    ppg: FilterCoefficients,
    accel: FilterCoefficients,
    temp: Option<FilterCoefficients>,
}

impl CompanionChain {
    pub fn new(device: &DeviceConfig) -> Result<Self, DspError> {
        let ppg = design_filter(&FilterSpec::band_pass(0.5, 2.5, device.ppg_rate_hz))?;
        let accel = design_filter(&FilterSpec::high_pass(0.2, device.accel_rate_hz))?;
        let temp = design_filter(&FilterSpec::low_pass(3.0, device.temp_rate_hz)).ok();
        Ok(CompanionChain { ppg, accel, temp })
    }

    pub fn uses_temperature_fallback(&self) -> bool {
        self.temp.is_none()
    }

    pub fn process(&self, burst: &SensorBurst) -> ProcessedBurst {
        let centered = |x: Vec<f64>| -> Vec<f64> {
            let m = x.iter().sum::<f64>() / x.len().max(1) as f64;
            x.into_iter().map(|v| v - m).collect()
        };
        let ppg = |x: &[u16]| {
            let raw: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
            apply_zero_phase(&self.ppg, &centered(raw))
        };
        let accel = |x: &[i16]| {
            let raw: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
            apply_zero_phase(&self.accel, &centered(raw))
        };
        let temp = |c: Vec<f64>| match &self.temp {
            Some(f) => apply_zero_phase(f, &c),
            None => moving_average(&c, 3),
        };
        ProcessedBurst {
            ts: burst.ts,
            ir: ppg(&burst.ir),
            red: ppg(&burst.red),
            accel_x: accel(&burst.accel_x),
            accel_y: accel(&burst.accel_y),
            accel_z: accel(&burst.accel_z),
            temp_wrist: temp(burst.wrist_temp_c()),
            temp_ambient: temp(burst.ambient_temp_c()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{SignalSource, SyntheticSource};

    #[test]
    fn default_chain_falls_back_for_temperature() {
        let chain = CompanionChain::new(&DeviceConfig::default()).unwrap();
        assert!(chain.uses_temperature_fallback());
        let mut b = SyntheticSource::default().burst(0, "x");
        b.temp_wrist = vec![3300, 3330, 3300, 3300];
        let p = chain.process(&b);
        assert_eq!(p.ir.len(), 124);
        assert_eq!(p.accel_x.len(), 136);
        assert!((p.temp_wrist[1] - 33.1).abs() < 1e-9);
        assert!((p.temp_ambient[0] - 24.0).abs() < 1e-9);
    }
}
