//! Both estimator paths over every segment, metrics and the report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{confusion, mae, Confusion, Histogram};
use super::{EvalError, EvalSegment};
use crate::dsp::{availability, classify_activity_baseline, ActivityLabel, ActivityThresholds, ConventionalEstimator, GatingConfig};
use crate::exec::{map_ordered, Execution};
use crate::interpreter::{build_prompt, interpret, reference_reply, VitalEstimate};
use crate::llm::{LookupClient, ModelClient, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonConfig {
    pub gating: GatingConfig,
    pub activity: ActivityThresholds,
    pub interpreter: ModelParams,
    /// Error histogram ranges and bin counts.
    pub hr_error_range: (f64, f64),
    pub hr_error_bins: usize,
    pub spo2_error_range: (f64, f64),
    pub spo2_error_bins: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            gating: GatingConfig::default(),
            activity: ActivityThresholds::default(),
            interpreter: ModelParams::interpreter(),
            hr_error_range: (-100.0, 100.0),
            hr_error_bins: 40,
            spo2_error_range: (-20.0, 20.0),
            spo2_error_bins: 40,
        }
    }
}

/// Both paths' outputs for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub subject_id: u32,
    pub recording: String,
    pub window: usize,
    pub hr_ref: Option<f64>,
    pub spo2_ref: Option<f64>,
    pub activity_ref: Option<ActivityLabel>,
    pub conv_hr: Option<f64>,
    pub conv_spo2: Option<f64>,
    pub conv_available: bool,
    pub conv_activity: ActivityLabel,
    pub llm_hr: Option<f64>,
    pub llm_spo2: Option<f64>,
    pub llm_activity: Option<String>,
    pub llm_error: Option<String>,
}

impl EvalRow {
    fn llm_label(&self) -> Option<ActivityLabel> {
        self.llm_activity.as_deref().and_then(|s| s.parse().ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    /// `None` when no segment had both an estimate and a reference.
    pub hr_mae: Option<f64>,
    pub hr_evaluated: usize,
    pub spo2_mae: Option<f64>,
    pub spo2_evaluated: usize,
    /// Segments with both HR and SpO2 produced.
    pub availability_pct: f64,
    /// Over segments with activity truth; a missing or unknown label counts as wrong.
    pub activity_accuracy_pct: Option<f64>,
    pub activity_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReference {
    pub hr_mae: f64,
    pub spo2_mae: f64,
    pub availability_pct: f64,
    pub activity_accuracy_pct: f64,
}

/// Published comparison figures, carried for side-by-side reading only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedReference {
    pub traces: usize,
    pub conventional: MethodReference,
    pub llm: MethodReference,
}

impl Default for PublishedReference {
    fn default() -> Self {
        PublishedReference {
            traces: 1003,
            conventional: MethodReference {
                hr_mae: 22.49,
                spo2_mae: 2.30,
                availability_pct: 70.29,
                activity_accuracy_pct: 32.80,
            },
            llm: MethodReference {
                hr_mae: 11.96,
                spo2_mae: 1.39,
                availability_pct: 100.00,
                activity_accuracy_pct: 38.48,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectDelta {
    pub subject_id: u32,
    pub segments: usize,
    pub conventional_hr_mae: Option<f64>,
    pub llm_hr_mae: Option<f64>,
    /// Conventional minus model error; positive means the model path did better.
    pub hr_delta: Option<f64>,
    pub conventional_spo2_mae: Option<f64>,
    pub llm_spo2_mae: Option<f64>,
    pub spo2_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDensity {
    pub metric: String,
    pub method: String,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub segments: usize,
    pub subjects: usize,
    pub recordings: usize,
    /// Model-path calls that returned a parseable reply.
    pub llm_estimates: usize,
    pub llm_failures: usize,
    pub conventional: MethodMetrics,
    pub llm: MethodMetrics,
    pub confusion_conventional: Option<Confusion>,
    pub confusion_llm: Option<Confusion>,
    pub per_subject: Vec<SubjectDelta>,
    pub error_density: Vec<ErrorDensity>,
    pub reference: PublishedReference,
    #[serde(skip)]
    pub rows: Vec<EvalRow>,
}

/// A client answering each segment's prompt with that segment's reference
/// values: the model path then reproduces the references exactly.
pub fn reference_echo_client(segments: &[EvalSegment]) -> LookupClient {
    let mut client = LookupClient::default();
    for s in segments {
        client.insert(build_prompt(&s.burst), reference_reply(s.hr_ref, s.spo2_ref, s.activity_ref));
    }
    client
}

/// Runs both paths over `segments` (in parallel when `exec` allows) and
/// reduces in input order, so the report does not depend on scheduling.
/// The model path has no fallback here: a failed call is an unavailable output.
pub fn run_comparison(
    segments: &[EvalSegment],
    client: &dyn ModelClient,
    config: &ComparisonConfig,
    exec: Execution,
) -> Result<ComparisonReport, EvalError> {
    if segments.is_empty() {
        return Err(EvalError::NoSegments);
    }
    let estimator = ConventionalEstimator::new(config.gating.clone(), super::PPG_RATE_HZ)
        .map_err(|e| EvalError::Config(e.to_string()))?;

    let evaluated = map_ordered(exec, segments, |s| {
        let conv = estimator.estimate(&s.burst);
        let b = &s.burst;
        let conv_activity = classify_activity_baseline(&b.accel_x, &b.accel_y, &b.accel_z, &config.activity);
        let llm: Result<VitalEstimate, String> =
            interpret(&s.burst, client, &config.interpreter).map_err(|e| e.to_string());
        let row = EvalRow {
            subject_id: s.subject_id,
            recording: s.recording.clone(),
            window: s.window,
            hr_ref: s.hr_ref,
            spo2_ref: s.spo2_ref,
            activity_ref: s.activity_ref,
            conv_hr: conv.hr_bpm,
            conv_spo2: conv.spo2_pct,
            conv_available: conv.is_available(),
            conv_activity,
            llm_hr: llm.as_ref().ok().and_then(|e| e.hr),
            llm_spo2: llm.as_ref().ok().and_then(|e| e.spo2),
            llm_activity: llm.as_ref().ok().and_then(|e| e.activity.as_ref()).map(|a| a.to_string()),
            llm_error: llm.err(),
        };
        (conv, row)
    });
    let (conv, rows): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();

    let conventional = MethodMetrics {
        availability_pct: availability(&conv).map_err(|e| EvalError::Config(e.to_string()))?,
        ..method_metrics(&rows, |r| r.conv_hr, |r| r.conv_spo2, |r| Some(r.conv_activity))
    };
    let llm = method_metrics(&rows, |r| r.llm_hr, |r| r.llm_spo2, EvalRow::llm_label);

    let confusion_for = |pred: &dyn Fn(&EvalRow) -> Option<ActivityLabel>| {
        let (p, t): (Vec<_>, Vec<_>) = rows.iter().filter_map(|r| Some((pred(r)?, r.activity_ref?))).unzip();
        confusion(&p, &t).ok()
    };

    let mut subjects: BTreeMap<u32, Vec<&EvalRow>> = BTreeMap::new();
    for r in &rows {
        subjects.entry(r.subject_id).or_default().push(r);
    }
    let per_subject = subjects
        .iter()
        .map(|(&id, rs)| {
            let m = |pred: fn(&EvalRow) -> Option<f64>, reference: fn(&EvalRow) -> Option<f64>| {
                masked_mae(rs.iter().copied(), pred, reference).0
            };
            let c_hr = m(|r| r.conv_hr, |r| r.hr_ref);
            let l_hr = m(|r| r.llm_hr, |r| r.hr_ref);
            let c_s = m(|r| r.conv_spo2, |r| r.spo2_ref);
            let l_s = m(|r| r.llm_spo2, |r| r.spo2_ref);
            SubjectDelta {
                subject_id: id,
                segments: rs.len(),
                conventional_hr_mae: c_hr,
                llm_hr_mae: l_hr,
                hr_delta: c_hr.zip(l_hr).map(|(c, l)| c - l),
                conventional_spo2_mae: c_s,
                llm_spo2_mae: l_s,
                spo2_delta: c_s.zip(l_s).map(|(c, l)| c - l),
            }
        })
        .collect();

    let density = |metric: &str, method: &str, pred: fn(&EvalRow) -> Option<f64>, reference: fn(&EvalRow) -> Option<f64>| {
        let errors: Vec<f64> = rows.iter().filter_map(|r| Some(pred(r)? - reference(r)?)).collect();
        let ((lo, hi), bins) = if metric == "hr" {
            (config.hr_error_range, config.hr_error_bins)
        } else {
            (config.spo2_error_range, config.spo2_error_bins)
        };
        ErrorDensity {
            metric: metric.to_owned(),
            method: method.to_owned(),
            histogram: Histogram::new(&errors, lo, hi, bins.max(1)),
        }
    };
    let error_density = vec![
        density("hr", "conventional", |r| r.conv_hr, |r| r.hr_ref),
        density("hr", "llm", |r| r.llm_hr, |r| r.hr_ref),
        density("spo2", "conventional", |r| r.conv_spo2, |r| r.spo2_ref),
        density("spo2", "llm", |r| r.llm_spo2, |r| r.spo2_ref),
    ];

    let mut recordings: Vec<(u32, &str)> = rows.iter().map(|r| (r.subject_id, r.recording.as_str())).collect();
    recordings.dedup();
    let llm_failures = rows.iter().filter(|r| r.llm_error.is_some()).count();
    Ok(ComparisonReport {
        segments: rows.len(),
        subjects: subjects.len(),
        recordings: recordings.len(),
        llm_estimates: rows.len() - llm_failures,
        llm_failures,
        conventional,
        llm,
        confusion_conventional: confusion_for(&|r| Some(r.conv_activity)),
        confusion_llm: confusion_for(&EvalRow::llm_label),
        per_subject,
        error_density,
        reference: PublishedReference::default(),
        rows,
    })
}

/// MAE over rows with both a prediction and a reference, and how many there were.
fn masked_mae<'a>(
    rows: impl Iterator<Item = &'a EvalRow>,
    pred: impl Fn(&EvalRow) -> Option<f64>,
    reference: impl Fn(&EvalRow) -> Option<f64>,
) -> (Option<f64>, usize) {
    let (mut p, mut r, mut m) = (Vec::new(), Vec::new(), Vec::new());
    for row in rows {
        let (a, b) = (pred(row), reference(row));
        p.push(a.unwrap_or(0.0));
        r.push(b.unwrap_or(0.0));
        m.push(a.is_some() && b.is_some());
    }
    let n = m.iter().filter(|x| **x).count();
    (mae(&p, &r, &m).ok(), n)
}

fn method_metrics(
    rows: &[EvalRow],
    hr: fn(&EvalRow) -> Option<f64>,
    spo2: fn(&EvalRow) -> Option<f64>,
    activity: fn(&EvalRow) -> Option<ActivityLabel>,
) -> MethodMetrics {
    let (hr_mae, hr_evaluated) = masked_mae(rows.iter(), hr, |r| r.hr_ref);
    let (spo2_mae, spo2_evaluated) = masked_mae(rows.iter(), spo2, |r| r.spo2_ref);
    let both = rows.iter().filter(|r| hr(r).is_some() && spo2(r).is_some()).count();
    let with_truth: Vec<&EvalRow> = rows.iter().filter(|r| r.activity_ref.is_some()).collect();
    let correct = with_truth.iter().filter(|r| activity(r) == r.activity_ref).count();
    MethodMetrics {
        hr_mae,
        hr_evaluated,
        spo2_mae,
        spo2_evaluated,
        availability_pct: 100.0 * both as f64 / rows.len().max(1) as f64,
        activity_accuracy_pct: (!with_truth.is_empty()).then(|| 100.0 * correct as f64 / with_truth.len() as f64),
        activity_evaluated: with_truth.len(),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| EvalError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| EvalError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| EvalError::Io(e.to_string()))
}

impl ComparisonReport {
    /// Report files by name. Contents depend only on the report values.
    pub fn files(&self) -> Result<Vec<(&'static str, Vec<u8>)>, EvalError> {
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| EvalError::Io(e.to_string()))?;
        json.push(b'\n');

        let deltas = csv_bytes(
            &[
                "subject",
                "segments",
                "conventional_hr_mae",
                "llm_hr_mae",
                "hr_delta",
                "conventional_spo2_mae",
                "llm_spo2_mae",
                "spo2_delta",
            ],
            self.per_subject.iter().map(|d| {
                vec![
                    format!("S{}", d.subject_id),
                    d.segments.to_string(),
                    cell(d.conventional_hr_mae),
                    cell(d.llm_hr_mae),
                    cell(d.hr_delta),
                    cell(d.conventional_spo2_mae),
                    cell(d.llm_spo2_mae),
                    cell(d.spo2_delta),
                ]
            }),
        )?;

        let density = csv_bytes(
            &["metric", "method", "bin_lo", "bin_hi", "count", "density"],
            self.error_density.iter().flat_map(|d| {
                d.histogram.rows().into_iter().map(|(lo, hi, c, dens)| {
                    vec![d.metric.clone(), d.method.clone(), lo.to_string(), hi.to_string(), c.to_string(), dens.to_string()]
                })
            }),
        )?;

        let mut conf_rows = Vec::new();
        for (method, c) in [("conventional", &self.confusion_conventional), ("llm", &self.confusion_llm)] {
            if let Some(c) = c {
                for truth in ActivityLabel::ALL {
                    let mut row = vec![method.to_owned(), truth.to_string()];
                    row.extend(c.matrix[truth.index()].iter().map(u64::to_string));
                    conf_rows.push(row);
                }
            }
        }
        let confusion = csv_bytes(&["method", "truth", "sit", "walk", "run"], conf_rows)?;

        let estimates = csv_bytes(
            &[
                "subject",
                "recording",
                "window",
                "hr_ref",
                "spo2_ref",
                "activity_ref",
                "conv_hr",
                "conv_spo2",
                "conv_available",
                "conv_activity",
                "llm_hr",
                "llm_spo2",
                "llm_activity",
                "llm_error",
            ],
            self.rows.iter().map(|r| {
                vec![
                    format!("S{}", r.subject_id),
                    r.recording.clone(),
                    r.window.to_string(),
                    cell(r.hr_ref),
                    cell(r.spo2_ref),
                    r.activity_ref.map(|a| a.to_string()).unwrap_or_default(),
                    cell(r.conv_hr),
                    cell(r.conv_spo2),
                    r.conv_available.to_string(),
                    r.conv_activity.to_string(),
                    cell(r.llm_hr),
                    cell(r.llm_spo2),
                    r.llm_activity.clone().unwrap_or_default(),
                    r.llm_error.clone().unwrap_or_default(),
                ]
            }),
        )?;

        Ok(vec![
            ("report.json", json),
            ("per_subject_deltas.csv", deltas),
            ("error_density.csv", density),
            ("confusion.csv", confusion),
            ("estimates.csv", estimates),
        ])
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), EvalError> {
        fs::create_dir_all(out_dir).map_err(|e| EvalError::Io(e.to_string()))?;
        for (name, bytes) in self.files()? {
            fs::write(out_dir.join(name), bytes).map_err(|e| EvalError::Io(e.to_string()))?;
        }
        Ok(())
    }

    /// Computed metrics next to the published ones, one line per figure.
    pub fn summary(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into());
        let (c, l, r) = (&self.conventional, &self.llm, &self.reference);
        format!(
            "segments {} (published traces {})\n\
             metric                conventional (published)   llm (published)\n\
             hr_mae_bpm            {:>12} ({:>6.2})   {:>9} ({:>6.2})\n\
             spo2_mae_pct          {:>12} ({:>6.2})   {:>9} ({:>6.2})\n\
             availability_pct      {:>12.2} ({:>6.2})   {:>9.2} ({:>6.2})\n\
             activity_accuracy_pct {:>12} ({:>6.2})   {:>9} ({:>6.2})\n",
            self.segments,
            r.traces,
            f(c.hr_mae),
            r.conventional.hr_mae,
            f(l.hr_mae),
            r.llm.hr_mae,
            f(c.spo2_mae),
            r.conventional.spo2_mae,
            f(l.spo2_mae),
            r.llm.spo2_mae,
            c.availability_pct,
            r.conventional.availability_pct,
            l.availability_pct,
            r.llm.availability_pct,
            f(c.activity_accuracy_pct),
            r.conventional.activity_accuracy_pct,
            f(l.activity_accuracy_pct),
            r.llm.activity_accuracy_pct,
        )
    }
}
