use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::interpreter::VitalEstimate;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("phone number {0:?} is not E.164 (+ followed by 7 to 15 digits)")]
    InvalidPhone(String),
    #[error("passcode must not be empty")]
    EmptyPasscode,
    #[error("threshold {metric}: low {low} must be below high {high}")]
    Thresholds { metric: &'static str, low: f64, high: f64 },
}

/// E.164: a plus sign, a non-zero leading digit, 7 to 15 digits total.
pub fn validate_phone(phone: &str) -> Result<(), ProfileError> {
    let digits = phone.strip_prefix('+').unwrap_or("");
    let ok = (7..=15).contains(&digits.len())
        && digits.bytes().all(|b| b.is_ascii_digit())
        && !digits.starts_with('0');
    if ok {
        Ok(())
    } else {
        Err(ProfileError::InvalidPhone(phone.to_owned()))
    }
}

/// Salted SHA-256 of the passcode, hex encoded. The phone number is the salt.
pub fn hash_passcode(phone: &str, passcode: &str) -> String {
    let mut h = Sha256::new();
    h.update(phone.as_bytes());
    h.update([0u8]);
    h.update(passcode.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-user alert bounds. HR alerts need `hr_sustain` consecutive
/// out-of-range estimates; SpO2 and temperature fire on a single reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlertThresholds {
    pub hr_low: f64,
    pub hr_high: f64,
    pub hr_sustain: usize,
    pub spo2_low: f64,
    pub spo2_high: f64,
    pub temp_low: f64,
    pub temp_high: f64,
}

impl Default for AlertThresholds {
    fn default() -> Self {
        AlertThresholds {
            hr_low: 50.0,
            hr_high: 120.0,
            hr_sustain: 3,
            spo2_low: 92.0,
            spo2_high: 100.0,
            temp_low: 30.0,
            temp_high: 38.0,
        }
    }
}

impl AlertThresholds {
    pub fn validate(&self) -> Result<(), ProfileError> {
        for (metric, low, high) in [
            ("hr", self.hr_low, self.hr_high),
            ("spo2", self.spo2_low, self.spo2_high),
            ("temp", self.temp_low, self.temp_high),
        ] {
            if !(low < high) {
                return Err(ProfileError::Thresholds { metric, low, high });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Preferences {
    /// 5-field cron for the daily summary.
    pub summary_cron: String,
    pub escalation_contacts: Vec<String>,
    pub uploads_paused: bool,
}

impl Default for Preferences {
    fn default() -> Self {
        Preferences {
            summary_cron: "0 20 * * *".into(),
            escalation_contacts: Vec::new(),
            uploads_paused: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub phone: String,
    pub passcode_hash: String,
    /// Bearer token issued at sign-up.
    pub token: String,
    pub device_id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub age: Option<u32>,
    #[serde(default)]
    pub bmi: Option<f64>,
    #[serde(default)]
    pub medical_background: Option<String>,
    #[serde(default)]
    pub demographic: Option<String>,
    #[serde(default)]
    pub thresholds: AlertThresholds,
    #[serde(default)]
    pub preferences: Preferences,
    #[serde(default)]
    pub welcomed: bool,
    #[serde(default)]
    pub signup_complete: bool,
    pub created_at: i64,
}

impl UserProfile {
    pub fn new(phone: &str, passcode: &str, device_id: &str, created_at: i64) -> Result<Self, ProfileError> {
        validate_phone(phone)?;
        if passcode.is_empty() {
            return Err(ProfileError::EmptyPasscode);
        }
        Ok(UserProfile {
            phone: phone.to_owned(),
            passcode_hash: hash_passcode(phone, passcode),
            token: uuid::Uuid::new_v4().simple().to_string(),
            device_id: device_id.to_owned(),
            name: None,
            age: None,
            bmi: None,
            medical_background: None,
            demographic: None,
            thresholds: AlertThresholds::default(),
            preferences: Preferences::default(),
            welcomed: false,
            signup_complete: false,
            created_at,
        })
    }

    pub fn check_passcode(&self, passcode: &str) -> bool {
        hash_passcode(&self.phone, passcode) == self.passcode_hash
    }

    /// Fields collected conversationally that are still missing.
    pub fn missing_required(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.name.is_none() {
            out.push("name");
        }
        if self.age.is_none() {
            out.push("age");
        }
        out
    }
}

/// A random 16-character band identifier that fits the packet's id field.
pub fn new_device_id() -> String {
    let hex = uuid::Uuid::new_v4().simple().to_string();
    format!("vc{}", &hex[..14])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    UrgentAlert,
    Note,
}

/// Long-term memory entry. Urgent alerts stay until the user deletes their data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEvent {
    pub user: String,
    pub ts: i64,
    pub kind: MemoryKind,
    pub summary: String,
    #[serde(default)]
    pub vitals: Option<VitalEstimate>,
}
