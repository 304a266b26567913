use super::AlertThresholds;
use crate::interpreter::VitalEstimate;

/// Why the newest estimate is urgent, empty when it is not. `history` ends
/// with the newest estimate. HR needs `hr_sustain` consecutive readings out
/// of range, or just the newest one when the band flagged an anomaly.
pub fn urgency_reasons(t: &AlertThresholds, history: &[VitalEstimate], anomaly: bool) -> Vec<String> {
    let Some(now) = history.last() else {
        return Vec::new();
    };
    let mut reasons = Vec::new();

    let need = if anomaly { 1 } else { t.hr_sustain.max(1) };
    if history.len() >= need {
        let window = &history[history.len() - need..];
        let high = window.iter().all(|v| v.hr.is_some_and(|h| h > t.hr_high));
        let low = window.iter().all(|v| v.hr.is_some_and(|h| h < t.hr_low));
        let hr = now.hr.unwrap_or_default();
        let span = if need == 1 {
            "in the latest reading".to_owned()
        } else {
            format!("for {need} readings in a row")
        };
        if high {
            reasons.push(format!("heart rate {hr:.0} BPM above your {:.0} BPM limit {span}", t.hr_high));
        } else if low {
            reasons.push(format!("heart rate {hr:.0} BPM below your {:.0} BPM limit {span}", t.hr_low));
        }
    }
    if let Some(s) = now.spo2.filter(|s| *s < t.spo2_low) {
        reasons.push(format!("blood oxygen {s:.0}% below {:.0}%", t.spo2_low));
    }
    if let Some(c) = now.temp_body.filter(|c| *c > t.temp_high) {
        reasons.push(format!("wrist temperature {c:.1} C above {:.1} C", t.temp_high));
    }
    reasons
}

/// Alert text sent for review before delivery.
pub fn draft_alert(reasons: &[String]) -> String {
    format!(
        "Heads-up from your band: {}. If you feel unwell, for example chest pain, dizziness or \
         shortness of breath, please contact a health professional or emergency services.",
        reasons.join("; ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpreter::VitalSource;

    fn v(hr: f64, spo2: f64, temp: f64) -> VitalEstimate {
        VitalEstimate {
            burst_ts: 0,
            hr: Some(hr),
            spo2: Some(spo2),
            activity: None,
            activity_verbose: None,
            temp_body: Some(temp),
            temp_ambient: None,
            source: VitalSource::Llm,
            clamped: vec![],
        }
    }

    #[test]
    fn within_bounds_is_quiet() {
        let t = AlertThresholds::default();
        assert!(urgency_reasons(&t, &vec![v(70.0, 97.0, 33.0); 3], false).is_empty());
        assert!(urgency_reasons(&t, &[], false).is_empty());
    }

    #[test]
    fn hr_needs_sustain_unless_anomaly() {
        let t = AlertThresholds::default();
        let two = [v(70.0, 97.0, 33.0), v(150.0, 97.0, 33.0), v(150.0, 97.0, 33.0)];
        assert!(urgency_reasons(&t, &two, false).is_empty());
        assert_eq!(urgency_reasons(&t, &two, true).len(), 1);
        let three = vec![v(150.0, 97.0, 33.0); 3];
        assert!(urgency_reasons(&t, &three, false)[0].contains("3 readings"));
        let low = vec![v(40.0, 97.0, 33.0); 3];
        assert!(urgency_reasons(&t, &low, false)[0].contains("below"));
        // Exactly at the bound is not out of range.
        assert!(urgency_reasons(&t, &vec![v(120.0, 92.0, 38.0); 3], false).is_empty());
    }

    #[test]
    fn spo2_and_temp_fire_immediately() {
        let t = AlertThresholds::default();
        let r = urgency_reasons(&t, &[v(70.0, 88.0, 38.6)], false);
        assert_eq!(r.len(), 2);
        assert!(draft_alert(&r).contains("88%"));
    }
}
