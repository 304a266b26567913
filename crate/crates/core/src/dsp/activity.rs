use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityLabel {
    Sit,
    Walk,
    Run,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 3] = [ActivityLabel::Sit, ActivityLabel::Walk, ActivityLabel::Run];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityLabel::Sit => "sit",
            ActivityLabel::Walk => "walk",
            ActivityLabel::Run => "run",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityLabel {
    type Err = String;

    /// Accepts the canonical labels plus a few common synonyms.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sit" | "sitting" | "rest" | "resting" | "still" => Ok(ActivityLabel::Sit),
            "walk" | "walking" => Ok(ActivityLabel::Walk),
            "run" | "running" | "jog" | "jogging" => Ok(ActivityLabel::Run),
            other => Err(format!("unknown activity label {other:?}")),
        }
    }
}

/// Movement-energy thresholds of the deterministic activity baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityThresholds {
    /// Energy (g^2) at or above which the wearer is walking.
    pub sit_walk_g2: f64,
    /// Energy (g^2) at or above which the wearer is running.
    pub walk_run_g2: f64,
    pub counts_per_g: f64,
}

impl Default for ActivityThresholds {
    fn default() -> Self {
        ActivityThresholds {
            sit_walk_g2: 0.02,
            walk_run_g2: 0.5,
            counts_per_g: 4096.0,
        }
    }
}

/// Variance of the acceleration vector, `E|a - mean(a)|^2`, in g^2.
/// Mean removal discards gravity for the window.
pub fn movement_energy_g2(x: &[i16], y: &[i16], z: &[i16], counts_per_g: f64) -> f64 {
    let axis_var = |a: &[i16]| -> f64 {
        if a.is_empty() {
            return 0.0;
        }
        let n = a.len() as f64;
        let g: Vec<f64> = a.iter().map(|&v| f64::from(v) / counts_per_g).collect();
        let m = g.iter().sum::<f64>() / n;
        g.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
    };
    axis_var(x) + axis_var(y) + axis_var(z)
}

/// Two-threshold classifier on movement energy; stands in for a learned model.
pub fn classify_activity_baseline(
    x: &[i16],
    y: &[i16],
    z: &[i16],
    thresholds: &ActivityThresholds,
) -> ActivityLabel {
    let e = movement_energy_g2(x, y, z, thresholds.counts_per_g);
    if e >= thresholds.walk_run_g2 {
        ActivityLabel::Run
    } else if e >= thresholds.sit_walk_g2 {
        ActivityLabel::Walk
    } else {
        ActivityLabel::Sit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillation(f: f64, amp_g: f64) -> Vec<i16> {
        (0..136)
            .map(|i| (amp_g * 4096.0 * (2.0 * PI * f * i as f64 / 34.0).sin()).round() as i16)
            .collect()
    }

    // Brute-force energy straight from the definition, in f64 g units.
    fn energy_oracle(axes: [&[i16]; 3]) -> f64 {
        let n = axes[0].len() as f64;
        let mean: Vec<f64> = axes
            .iter()
            .map(|a| a.iter().map(|&v| v as f64 / 4096.0).sum::<f64>() / n)
            .collect();
        (0..axes[0].len())
            .map(|i| {
                (0..3)
                    .map(|k| (axes[k][i] as f64 / 4096.0 - mean[k]).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n
    }

    #[test]
    fn zero_accel_is_sit() {
        let z = vec![0i16; 136];
        assert_eq!(
            classify_activity_baseline(&z, &z, &z, &ActivityThresholds::default()),
            ActivityLabel::Sit
        );
    }

    #[test]
    fn walk_and_run_oscillations() {
        let zero = vec![0i16; 136];
        let gravity = vec![4096i16; 136];
        let t = ActivityThresholds::default();

        let walk = oscillation(2.0, 0.5);
        let e = energy_oracle([&walk, &zero, &gravity]);
        // A^2/2 for a whole number of cycles
        assert!((e - 0.125).abs() < 1e-3, "{e}");
        assert!((movement_energy_g2(&walk, &zero, &gravity, 4096.0) - e).abs() < 1e-12);
        assert_eq!(classify_activity_baseline(&walk, &zero, &gravity, &t), ActivityLabel::Walk);

        let run = oscillation(3.0, 1.5);
        let e = energy_oracle([&run, &zero, &gravity]);
        assert!((e - 1.125).abs() < 1e-2, "{e}");
        assert_eq!(classify_activity_baseline(&run, &zero, &gravity, &t), ActivityLabel::Run);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Walking".parse::<ActivityLabel>().unwrap(), ActivityLabel::Walk);
        assert!("swim".parse::<ActivityLabel>().is_err());
        assert_eq!(ActivityLabel::Run.to_string(), "run");
    }
}
