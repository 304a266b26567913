//! Recording ingest and a synthetic recording generator with the same layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dsp::{ratio_for_spo2, ActivityLabel};

/// Column names, sampling rates and unit conversions of a dataset on disk.
/// Files are named `s{subject}_{recording}.csv` with one header row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetLayout {
    pub ir_column: String,
    pub red_column: String,
    pub accel_columns: [String; 3],
    pub hr_column: String,
    pub spo2_column: String,
    /// Row rate of the file, which is also the PPG rate.
    pub fs_ppg: f64,
    /// Accelerometer rate; rows between accelerometer samples leave those cells blank.
    pub fs_accel: f64,
    /// Raw PPG value to 16-bit band counts: `raw * scale + offset`.
    pub ppg_scale: f64,
    pub ppg_offset: f64,
    /// Raw accelerometer value to g.
    pub accel_scale_g: f64,
    /// Band accelerometer counts per g when re-quantizing.
    pub counts_per_g: f64,
    /// Recording name to activity class. Unmapped recordings have no activity truth.
    pub activity_map: BTreeMap<String, ActivityLabel>,
    /// The dataset has no temperature channels; bursts carry these constants.
    pub wrist_temp_c: f64,
    pub ambient_temp_c: f64,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        DatasetLayout {
            ir_column: "pleth_ir".into(),
            red_column: "pleth_red".into(),
            accel_columns: ["a_x".into(), "a_y".into(), "a_z".into()],
            hr_column: "hr_ref".into(),
            spo2_column: "spo2_ref".into(),
            fs_ppg: 1000.0,
            fs_accel: 500.0,
            ppg_scale: 1.0,
            ppg_offset: 0.0,
            accel_scale_g: 1.0,
            counts_per_g: 4096.0,
            activity_map: [
                ("sit", ActivityLabel::Sit),
                ("walk", ActivityLabel::Walk),
                ("run", ActivityLabel::Run),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect(),
            wrist_temp_c: 33.0,
            ambient_temp_c: 25.0,
        }
    }
}

/// One recording with units normalized: PPG in band counts, acceleration in g.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    pub subject_id: u32,
    pub recording: String,
    pub activity: Option<ActivityLabel>,
    pub fs_ppg: f64,
    pub fs_accel: f64,
    pub ppg_ir: Vec<f64>,
    pub ppg_red: Vec<f64>,
    pub accel: [Vec<f64>; 3],
    /// Reference series at the PPG rate, forward-filled; `None` before the first value.
    pub hr_ref: Vec<Option<f64>>,
    pub spo2_ref: Vec<Option<f64>>,
    /// Optional channels the file did not provide.
    pub missing: Vec<String>,
}

impl ReferenceRecord {
    pub fn duration_s(&self) -> f64 {
        self.ppg_ir.len() as f64 / self.fs_ppg
    }

    pub fn label(&self) -> String {
        format!("s{}_{}", self.subject_id, self.recording)
    }
}

/// `s12_walk.csv` -> (12, "walk").
fn parse_file_name(path: &Path) -> Option<(u32, String)> {
    let stem = path.file_name()?.to_str()?.strip_suffix(".csv")?;
    let (subject, recording) = stem.strip_prefix('s')?.split_once('_')?;
    let id = subject.parse().ok()?;
    (!recording.is_empty()).then(|| (id, recording.to_owned()))
}

/// Reads every `s{N}_{name}.csv` in `dir`, ordered by subject then recording.
pub fn ingest(dir: &Path, layout: &DatasetLayout) -> Result<Vec<ReferenceRecord>, EvalError> {
    if !(layout.fs_ppg > 0.0 && layout.fs_accel > 0.0) {
        return Err(EvalError::InvalidRate {
            fs_in: layout.fs_ppg,
            fs_out: layout.fs_accel,
        });
    }
    let entries = fs::read_dir(dir).map_err(|_| EvalError::MissingFile(dir.to_path_buf()))?;
    let mut files: Vec<(u32, String, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| parse_file_name(&p).map(|(s, r)| (s, r, p)))
        .collect();
    if files.is_empty() {
        return Err(EvalError::MissingFile(dir.join("s{N}_{recording}.csv")));
    }
    files.sort();
    files
        .into_iter()
        .map(|(subject, recording, path)| read_record(&path, subject, recording, layout))
        .collect()
}

fn read_record(
    path: &Path,
    subject_id: u32,
    recording: String,
    layout: &DatasetLayout,
) -> Result<ReferenceRecord, EvalError> {
    let mismatch = |reason: String| EvalError::SchemaMismatch {
        file: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| mismatch(e.to_string()))?;
    let headers = reader.headers().map_err(|e| mismatch(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);

    let ir_col = col(&layout.ir_column).ok_or_else(|| mismatch(format!("no column {:?}", layout.ir_column)))?;
    let red_col = col(&layout.red_column).ok_or_else(|| mismatch(format!("no column {:?}", layout.red_column)))?;
    let accel_cols = layout.accel_columns.clone().map(|c| col(&c));
    let hr_col = col(&layout.hr_column);
    let spo2_col = col(&layout.spo2_column);

    let mut missing = Vec::new();
    for (name, c) in layout.accel_columns.iter().zip(&accel_cols) {
        if c.is_none() {
            missing.push(name.clone());
        }
    }
    if hr_col.is_none() {
        missing.push(layout.hr_column.clone());
    }
    if spo2_col.is_none() {
        missing.push(layout.spo2_column.clone());
    }

    let mut rec = ReferenceRecord {
        subject_id,
        activity: layout.activity_map.get(&recording).copied(),
        recording,
        fs_ppg: layout.fs_ppg,
        fs_accel: layout.fs_accel,
        ppg_ir: Vec::new(),
        ppg_red: Vec::new(),
        accel: Default::default(),
        hr_ref: Vec::new(),
        spo2_ref: Vec::new(),
        missing,
    };
    let (mut hr_last, mut spo2_last) = (None, None);
    for (i, row) in reader.records().enumerate() {
        // The csv reader rejects rows whose field count differs from the header.
        let row = row.map_err(|e| mismatch(e.to_string()))?;
        let line = i + 2;
        let number = |c: usize, required: bool| -> Result<Option<f64>, EvalError> {
            let cell = row.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                return if required {
                    Err(mismatch(format!("line {line}: empty {:?}", &headers[c])))
                } else {
                    Ok(None)
                };
            }
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| mismatch(format!("line {line}: {:?} is not a number: {cell:?}", &headers[c])))
        };
        let to_counts = |v: f64| v * layout.ppg_scale + layout.ppg_offset;
        rec.ppg_ir.push(to_counts(number(ir_col, true)?.unwrap_or_default()));
        rec.ppg_red.push(to_counts(number(red_col, true)?.unwrap_or_default()));
        for (axis, c) in accel_cols.iter().enumerate() {
            if let Some(v) = c.map(|c| number(c, false)).transpose()?.flatten() {
                rec.accel[axis].push(v * layout.accel_scale_g);
            }
        }
        if let Some(v) = hr_col.map(|c| number(c, false)).transpose()?.flatten() {
            hr_last = Some(v);
        }
        if let Some(v) = spo2_col.map(|c| number(c, false)).transpose()?.flatten() {
            spo2_last = Some(v);
        }
        rec.hr_ref.push(hr_last);
        rec.spo2_ref.push(spo2_last);
    }
    if rec.ppg_ir.is_empty() {
        return Err(mismatch("no data rows".into()));
    }
    Ok(rec)
}

/// Shape of a generated recording set.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub subjects: u32,
    pub seconds: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            subjects: 3,
            seconds: 20.0,
            seed: 7,
        }
    }
}

/// Writes sit/walk/run recordings per subject in the default layout. Heart
/// rate and SpO2 drift slowly; walking and running add bursts of motion
/// artifact that couple more strongly into red than IR, so some windows fail
/// quality gating. Returns the written paths.
pub fn write_synthetic_dataset(dir: &Path, spec: &SyntheticSpec) -> Result<Vec<PathBuf>, EvalError> {
    let layout = DatasetLayout::default();
    fs::create_dir_all(dir).map_err(|e| EvalError::Io(e.to_string()))?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let rows = (spec.seconds * layout.fs_ppg).round() as usize;
    let accel_every = (layout.fs_ppg / layout.fs_accel).round().max(1.0) as usize;
    let mut written = Vec::new();

    for subject in 1..=spec.subjects {
        let hr_offset = rng.gen_range(-6.0..6.0);
        let spo2_base = rng.gen_range(95.5..98.5);
        for (recording, base_hr, step_hz, accel_amp, artifact) in [
            ("sit", 68.0, 0.0f64, 0.0, 0.0),
            ("walk", 92.0, 1.8, 0.25, 0.15),
            ("run", 128.0, 2.6, 1.1, 0.9),
        ] {
            let path = dir.join(format!("s{subject}_{recording}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| EvalError::Io(e.to_string()))?;
            w.write_record(["time", "pleth_ir", "pleth_red", "a_x", "a_y", "a_z", "hr_ref", "spo2_ref"])
                .map_err(|e| EvalError::Io(e.to_string()))?;
            let drift_phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut beat_phase = 0.0f64;
            let mut art_phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut envelope = 0.0;
            for i in 0..rows {
                let t = i as f64 / layout.fs_ppg;
                let hr = base_hr + hr_offset + 4.0 * (0.05 * std::f64::consts::TAU * t + drift_phase).sin();
                let spo2 = (spo2_base + 0.8 * (0.03 * std::f64::consts::TAU * t + drift_phase).cos()).min(100.0);
                beat_phase += std::f64::consts::TAU * hr / 60.0 / layout.fs_ppg;
                art_phase += std::f64::consts::TAU * rng.gen_range(0.4..1.6) * step_hz.max(0.5) / layout.fs_ppg;
                let pulse = beat_phase.sin() + 0.25 * (2.0 * beat_phase).sin();
                let r = ratio_for_spo2(spo2).unwrap_or(0.5);
                let (dc_ir, ac_ir) = (30_000.0, 400.0);
                let (dc_red, ac_red) = (24_000.0, 400.0 * r * 24_000.0 / 30_000.0);
                if i % layout.fs_ppg as usize == 0 {
                    // artifact strength changes once per second; quiet 40% of the time
                    envelope = if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.5..2.0) };
                }
                let motion = artifact * envelope * 900.0 * art_phase.sin();
                let ir = dc_ir + ac_ir * pulse + motion + rng.gen_range(-20.0..20.0);
                let red = dc_red + ac_red * pulse + 1.6 * motion + rng.gen_range(-20.0..20.0);

                let accel = if i % accel_every == 0 {
                    let s = (std::f64::consts::TAU * step_hz * t).sin();
                    let mut jitter = || 0.01 * rng.gen_range(-1.0..1.0);
                    [
                        format!("{:.4}", accel_amp * s + jitter()),
                        format!("{:.4}", 0.5 * accel_amp * s + jitter()),
                        format!("{:.4}", 1.0 + 0.7 * accel_amp * s + jitter()),
                    ]
                } else {
                    Default::default()
                };
                // References are reported once per second; ingest forward-fills them.
                let (hr_cell, spo2_cell) = if i % layout.fs_ppg as usize == 0 {
                    (format!("{hr:.2}"), format!("{spo2:.2}"))
                } else {
                    Default::default()
                };
                w.write_record([
                    format!("{t:.3}"),
                    format!("{ir:.1}"),
                    format!("{red:.1}"),
                    accel[0].clone(),
                    accel[1].clone(),
                    accel[2].clone(),
                    hr_cell,
                    spo2_cell,
                ])
                .map_err(|e| EvalError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| EvalError::Io(e.to_string()))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names() {
        assert_eq!(parse_file_name(Path::new("/x/s12_walk.csv")), Some((12, "walk".into())));
        assert_eq!(parse_file_name(Path::new("s3_run_fast.csv")), Some((3, "run_fast".into())));
        assert_eq!(parse_file_name(Path::new("readme.csv")), None);
        assert_eq!(parse_file_name(Path::new("s1_walk.txt")), None);
        assert_eq!(parse_file_name(Path::new("s_walk.csv")), None);
    }

    #[test]
    fn subject_directory_gives_three_records() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            subjects: 1,
            seconds: 5.0,
            seed: 1,
        };
        write_synthetic_dataset(dir.path(), &spec).unwrap();
        let recs = ingest(dir.path(), &DatasetLayout::default()).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.subject_id == 1 && r.missing.is_empty()));
        let names: Vec<_> = recs.iter().map(|r| r.recording.as_str()).collect();
        assert_eq!(names, ["run", "sit", "walk"]);
        let r = &recs[0];
        assert_eq!(r.ppg_ir.len(), 5000);
        assert_eq!(r.accel[0].len(), 2500);
        assert_eq!(r.activity, Some(ActivityLabel::Run));
        assert!(r.hr_ref.iter().all(Option::is_some));
        assert!((r.duration_s() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_or_absent_directory_is_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let layout = DatasetLayout::default();
        assert!(matches!(ingest(dir.path(), &layout), Err(EvalError::MissingFile(_))));
        assert!(matches!(ingest(&dir.path().join("nope"), &layout), Err(EvalError::MissingFile(_))));
    }

    #[test]
    fn truncated_csv_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s4_sit.csv");
        fs::write(
            &path,
            "time,pleth_ir,pleth_red,a_x,a_y,a_z,hr_ref,spo2_ref\n0,1,2,0,0,1,70,98\n0.001,1,2\n",
        )
        .unwrap();
        match ingest(dir.path(), &DatasetLayout::default()) {
            Err(EvalError::SchemaMismatch { file, .. }) => assert_eq!(file, path),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_required_column_is_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("s1_sit.csv"), "time,pleth_ir\n0,1\n").unwrap();
        let err = ingest(dir.path(), &DatasetLayout::default()).unwrap_err();
        assert!(err.to_string().contains("pleth_red"), "{err}");
    }

    #[test]
    fn optional_channels_are_reported_and_references_forward_filled() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("s2_sit.csv"),
            "time,pleth_ir,pleth_red,hr_ref\n0,10,20,\n1,10,20,71\n2,10,20,\n",
        )
        .unwrap();
        let layout = DatasetLayout {
            ppg_scale: 2.0,
            ppg_offset: 5.0,
            ..DatasetLayout::default()
        };
        let r = ingest(dir.path(), &layout).unwrap().remove(0);
        assert_eq!(r.missing, ["a_x", "a_y", "a_z", "spo2_ref"]);
        assert_eq!(r.hr_ref, [None, Some(71.0), Some(71.0)]);
        assert_eq!(r.ppg_ir, [25.0; 3]);
        assert_eq!(r.ppg_red, [45.0; 3]);
    }

    #[test]
    fn synthetic_dataset_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            subjects: 1,
            seconds: 2.0,
            seed: 9,
        };
        write_synthetic_dataset(a.path(), &spec).unwrap();
        write_synthetic_dataset(b.path(), &spec).unwrap();
        for name in ["s1_sit.csv", "s1_walk.csv", "s1_run.csv"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }
}
