//! Burst packet codec and device simulator.
//!
//! Packet layout (all multi-byte fields little-endian, 1350 bytes total):
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! |      0 |    4 | `ts`, u32 unix seconds                  |
//! |      4 |   16 | `device_id`, ASCII, NUL padded          |
//! |     20 |  272 | `accel_x`, 136 x i16 raw counts         |
//! |    292 |  272 | `accel_y`, 136 x i16                    |
//! |    564 |  272 | `accel_z`, 136 x i16                    |
//! |    836 |  248 | `ir`, 124 x u16 raw PPG counts          |
//! |   1084 |  248 | `red`, 124 x u16                        |
//! |   1332 |    8 | `temp_wrist`, 4 x u16 hundredths of degC |
//! |   1340 |    8 | `temp_ambient`, 4 x u16                 |
//! |   1348 |    2 | CRC-16/CCITT-FALSE over bytes 0..1348   |

mod codec;
mod crc;
mod sim;
mod synth;

pub use codec::{decode, encode};
pub use crc::crc16_ccitt_false;
pub use sim::{
    simulate_device, CycleReport, DeviceSimulator, DeviceState, LinkFraming, StateSpan,
};
pub use synth::{SignalSource, SyntheticSource, VitalsPreset};

use serde::{Deserialize, Serialize};

/// Accelerometer samples per axis in one burst (34 Hz x 4 s).
pub const ACCEL_SAMPLES: usize = 136;
/// PPG samples per channel in one burst (31 Hz x 4 s).
pub const PPG_SAMPLES: usize = 124;
/// Temperature samples per sensor in one burst (1 Hz x 4 s).
pub const TEMP_SAMPLES: usize = 4;
/// Width of the device-id field.
pub const DEVICE_ID_LEN: usize = 16;
/// Encoded packet length, CRC included.
pub const PACKET_LEN: usize =
    4 + DEVICE_ID_LEN + 3 * ACCEL_SAMPLES * 2 + 2 * PPG_SAMPLES * 2 + 2 * TEMP_SAMPLES * 2 + 2;
/// Samples carried per packet across all channels.
pub const SAMPLES_PER_PACKET: usize = 3 * ACCEL_SAMPLES + 2 * PPG_SAMPLES + 2 * TEMP_SAMPLES;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WireError {
    #[error("field `{field}` has {actual} samples, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("device id must be at most {DEVICE_ID_LEN} printable ASCII bytes: {0:?}")]
    InvalidDeviceId(String),
    #[error("checksum mismatch: computed {computed:#06x}, packet carries {carried:#06x}")]
    ChecksumMismatch { computed: u16, carried: u16 },
    #[error("truncated packet: {actual} bytes, expected {PACKET_LEN}")]
    TruncatedPacket { actual: usize },
    #[error("packet too long: {actual} bytes, expected {PACKET_LEN}")]
    TrailingBytes { actual: usize },
}

/// One 4-second multi-modal acquisition window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorBurst {
    pub ts: u32,
    pub device_id: String,
    pub accel_x: Vec<i16>,
    pub accel_y: Vec<i16>,
    pub accel_z: Vec<i16>,
    pub ir: Vec<u16>,
    pub red: Vec<u16>,
    /// Hundredths of a degree Celsius.
    pub temp_wrist: Vec<u16>,
    /// Hundredths of a degree Celsius.
    pub temp_ambient: Vec<u16>,
}

impl SensorBurst {
    /// An all-zero burst with correct cardinalities.
    pub fn zeroed(ts: u32, device_id: impl Into<String>) -> Self {
        SensorBurst {
            ts,
            device_id: device_id.into(),
            accel_x: vec![0; ACCEL_SAMPLES],
            accel_y: vec![0; ACCEL_SAMPLES],
            accel_z: vec![0; ACCEL_SAMPLES],
            ir: vec![0; PPG_SAMPLES],
            red: vec![0; PPG_SAMPLES],
            temp_wrist: vec![0; TEMP_SAMPLES],
            temp_ambient: vec![0; TEMP_SAMPLES],
        }
    }

    /// Checks channel cardinalities and the device id.
    pub fn validate(&self) -> Result<(), WireError> {
        let checks: [(&'static str, usize, usize); 7] = [
            ("accel_x", self.accel_x.len(), ACCEL_SAMPLES),
            ("accel_y", self.accel_y.len(), ACCEL_SAMPLES),
            ("accel_z", self.accel_z.len(), ACCEL_SAMPLES),
            ("ir", self.ir.len(), PPG_SAMPLES),
            ("red", self.red.len(), PPG_SAMPLES),
            ("temp_wrist", self.temp_wrist.len(), TEMP_SAMPLES),
            ("temp_ambient", self.temp_ambient.len(), TEMP_SAMPLES),
        ];
        for (field, actual, expected) in checks {
            if actual != expected {
                return Err(WireError::LengthMismatch {
                    field,
                    expected,
                    actual,
                });
            }
        }
        let id = self.device_id.as_bytes();
        if id.len() > DEVICE_ID_LEN || id.iter().any(|b| !(0x21..=0x7e).contains(b)) {
            return Err(WireError::InvalidDeviceId(self.device_id.clone()));
        }
        Ok(())
    }

    pub fn wrist_temp_c(&self) -> Vec<f64> {
        self.temp_wrist.iter().map(|&t| f64::from(t) / 100.0).collect()
    }

    pub fn ambient_temp_c(&self) -> Vec<f64> {
        self.temp_ambient.iter().map(|&t| f64::from(t) / 100.0).collect()
    }
}

/// Acquisition and link timing of the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConfig {
    pub accel_rate_hz: f64,
    pub ppg_rate_hz: f64,
    pub temp_rate_hz: f64,
    pub window_s: f64,
    pub connection_window_s: f64,
    pub inter_sample_delay_ms: f64,
    pub baud: u32,
    pub reset_s: f64,
    pub scan_s: f64,
    pub framing: LinkFraming,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            accel_rate_hz: 34.4,
            ppg_rate_hz: 31.0,
            temp_rate_hz: 1.0,
            window_s: 4.0,
            connection_window_s: 3.5,
            inter_sample_delay_ms: 1.0,
            baud: 9600,
            reset_s: 0.05,
            scan_s: 1.0,
            framing: LinkFraming::HexText,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), String> {
        let rates = [
            ("accel_rate_hz", self.accel_rate_hz),
            ("ppg_rate_hz", self.ppg_rate_hz),
            ("temp_rate_hz", self.temp_rate_hz),
            ("window_s", self.window_s),
        ];
        for (name, v) in rates {
            if !(v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        if self.baud == 0 {
            return Err("baud must be > 0".into());
        }
        let ppg = self.window_s * self.ppg_rate_hz;
        if (ppg - PPG_SAMPLES as f64).abs() > 1e-9 {
            return Err(format!(
                "window_s x ppg_rate_hz must equal {PPG_SAMPLES}, got {ppg}"
            ));
        }
        Ok(())
    }
}
