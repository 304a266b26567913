//! Error metrics, confusion matrices and error histograms.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dsp::ActivityLabel;

/// Mean absolute error over the entries where `mask` is true.
pub fn mae(predictions: &[f64], references: &[f64], mask: &[bool]) -> Result<f64, EvalError> {
    if predictions.len() != references.len() || predictions.len() != mask.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: references.len().max(mask.len()),
        });
    }
    let (sum, n) = predictions
        .iter()
        .zip(references)
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), ((p, r), _)| (s + (p - r).abs(), n + 1));
    if n == 0 {
        return Err(EvalError::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// Rows are the true class, columns the prediction, in sit/walk/run order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub matrix: [[u64; 3]; 3],
    pub accuracy_pct: f64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.matrix.iter().flatten().sum()
    }
}

pub fn confusion(predicted: &[ActivityLabel], truth: &[ActivityLabel]) -> Result<Confusion, EvalError> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(EvalError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    let mut matrix = [[0u64; 3]; 3];
    for (p, t) in predicted.iter().zip(truth) {
        matrix[t.index()][p.index()] += 1;
    }
    let correct: u64 = (0..3).map(|i| matrix[i][i]).sum();
    Ok(Confusion {
        matrix,
        accuracy_pct: 100.0 * correct as f64 / truth.len() as f64,
    })
}

/// Equal-width histogram of signed errors. Values outside `[lo, hi)` land in
/// the edge bins so every error is counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for v in values {
            let b = ((v - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            counts[b] += 1;
        }
        Histogram { lo, width, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(bin_lo, bin_hi, count, density)`, density normalized to unit area.
    pub fn rows(&self) -> Vec<(f64, f64, u64, f64)> {
        let total = self.total().max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let lo = self.lo + i as f64 * self.width;
                (lo, lo + self.width, c, c as f64 / (total * self.width))
            })
            .collect()
    }
}
