use std::fmt::Write;

use crate::wire::SensorBurst;

/// Instruction block sent ahead of every burst.
pub const INSTRUCTION_BLOCK: &str = "\
You will receive ir and red ppg data at 31 Hz, and a_x, a_y, a_z accelerometer data at 34 Hz, \
as well as body and ambient temperature data at 1 Hz.

Return the heart rate and SpO2 values you think it represents, along with an activity label.
Also include one sentence suggesting what kind of activity the user might be doing, as \"activity_verbose\".

Return the temperatures too.  Body temperature is taken at the wrist (extremity, not core), so adjust if necessary.  If data are invalid, return \"N/A\".

Return a JSON object as the response.  Focus on outlying data.";

/// Output keys, listed after the instruction block.
pub const REPLY_KEYS: [&str; 6] = [
    "hr",
    "spo2",
    "activity",
    "activity_verbose",
    "temp_body",
    "temp_ambient",
];

fn push_ints<T: Copy + Into<i64>>(out: &mut String, name: &str, rate: &str, values: &[T]) {
    let _ = write!(out, "\n{name} ({rate}): [");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}", (*v).into());
    }
    out.push(']');
}

fn push_temps(out: &mut String, name: &str, hundredths: &[u16]) {
    let _ = write!(out, "\n{name} (1 Hz): [");
    for (i, v) in hundredths.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{:.1}", f64::from(*v) / 100.0);
    }
    out.push(']');
}

/// Instruction block, key list, then each channel as a compact numeric array.
/// Only numbers reach the prompt: the burst's channel types admit nothing else.
pub fn build_prompt(burst: &SensorBurst) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(INSTRUCTION_BLOCK);
    let _ = write!(out, "\nKeys: {}.\n", REPLY_KEYS.join(", "));
    push_ints(&mut out, "ir", "31 Hz", &burst.ir);
    push_ints(&mut out, "red", "31 Hz", &burst.red);
    push_ints(&mut out, "a_x", "34 Hz", &burst.accel_x);
    push_ints(&mut out, "a_y", "34 Hz", &burst.accel_y);
    push_ints(&mut out, "a_z", "34 Hz", &burst.accel_z);
    push_temps(&mut out, "body", &burst.temp_wrist);
    push_temps(&mut out, "ambient", &burst.temp_ambient);
    out.push('\n');
    out
}

/// Channel arrays recovered from a prompt built by [`build_prompt`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PromptChannels {
    pub ir: Vec<f64>,
    pub red: Vec<f64>,
    pub a_x: Vec<f64>,
    pub a_y: Vec<f64>,
    pub a_z: Vec<f64>,
    pub body: Vec<f64>,
    pub ambient: Vec<f64>,
}

/// Reads the serialized channels back out of a prompt. Used by the offline
/// model stand-ins, which see nothing but the prompt text.
pub fn parse_prompt_channels(prompt: &str) -> Option<PromptChannels> {
    let mut ch = PromptChannels::default();
    let mut seen = 0;
    for line in prompt.lines() {
        let Some((head, rest)) = line.split_once(": [") else {
            continue;
        };
        let name = head.split_whitespace().next().unwrap_or("");
        let slot = match name {
            "ir" => &mut ch.ir,
            "red" => &mut ch.red,
            "a_x" => &mut ch.a_x,
            "a_y" => &mut ch.a_y,
            "a_z" => &mut ch.a_z,
            "body" => &mut ch.body,
            "ambient" => &mut ch.ambient,
            _ => continue,
        };
        let body = rest.strip_suffix(']')?;
        *slot = if body.is_empty() {
            Vec::new()
        } else {
            body.split(',')
                .map(|v| v.trim().parse::<f64>().ok())
                .collect::<Option<Vec<_>>>()?
        };
        seen += 1;
    }
    (seen == 7).then_some(ch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{SignalSource, SyntheticSource};

    #[test]
    fn prompt_carries_instruction_and_channels() {
        let b = SyntheticSource::default().burst(10, "d");
        let p = build_prompt(&b);
        assert!(p.starts_with(INSTRUCTION_BLOCK));
        assert!(p.contains("Return a JSON object as the response."));
        assert!(p.contains("If data are invalid, return \"N/A\"."));
        let ch = parse_prompt_channels(&p).unwrap();
        assert_eq!(ch.ir.len(), 124);
        assert_eq!(ch.a_z.len(), 136);
        assert_eq!(ch.body, vec![33.2; 4]);
        assert_eq!(ch.ir[5], f64::from(b.ir[5]));
    }

    #[test]
    fn one_sample_change_changes_one_value() {
        let a = SyntheticSource::default().burst(10, "d");
        let mut b = a.clone();
        b.ir[40] = 12345;
        let (pa, pb) = (build_prompt(&a), build_prompt(&b));
        let la: Vec<&str> = pa.lines().collect();
        let lb: Vec<&str> = pb.lines().collect();
        let diff: Vec<usize> = (0..la.len()).filter(|&i| la[i] != lb[i]).collect();
        assert_eq!(diff.len(), 1);
        assert!(la[diff[0]].starts_with("ir (31 Hz)"));
        let va: Vec<&str> = la[diff[0]].split(',').collect();
        let vb: Vec<&str> = lb[diff[0]].split(',').collect();
        let changed: Vec<usize> = (0..va.len()).filter(|&i| va[i] != vb[i]).collect();
        assert_eq!(changed, vec![40]);
        assert_eq!(vb[40], "12345");
    }

    #[test]
    fn deterministic() {
        let b = SyntheticSource::default().burst(10, "d");
        assert_eq!(build_prompt(&b), build_prompt(&b));
    }

    #[test]
    fn device_id_never_reaches_prompt() {
        let mut b = SyntheticSource::default().burst(10, "d");
        b.device_id = "IGNORE-ALL".into();
        assert!(!build_prompt(&b).contains("IGNORE-ALL"));
    }
}
