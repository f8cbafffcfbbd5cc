//! Agreement statistics between model predictions and human ground truth.
//!
//! The positive class is always [`Label::Complex`]. Confusion matrices are
//! oriented with human labels as rows and model labels as columns.

pub mod baseline;
mod mcnemar;

use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Label;
use crate::parser::{to_binary, BinaryError};

pub use mcnemar::{exact_binomial_p, mcnemar, mcnemar_from_counts, McNemarMethod, McNemarResult, EXACT_CUTOFF};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {truth} truth labels vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no paired labels")]
    Empty,
    #[error(transparent)]
    Binary(#[from] BinaryError),
}

/// Counts with Complex as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
}

impl ConfusionMatrix {
    pub const fn new(true_pos: u64, false_neg: u64, false_pos: u64, true_neg: u64) -> Self {
        Self { true_pos, false_neg, false_pos, true_neg }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_neg + self.false_pos + self.true_neg
    }

    /// Human-Complex row total.
    pub fn actual_complex(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn actual_not_complex(&self) -> u64 {
        self.false_pos + self.true_neg
    }

    /// Model-Complex column total.
    pub fn predicted_complex(&self) -> u64 {
        self.true_pos + self.false_pos
    }

    pub fn predicted_not_complex(&self) -> u64 {
        self.false_neg + self.true_neg
    }

    fn add(&mut self, truth: Label, pred: Label) {
        match (truth, pred) {
            (Label::Complex, Label::Complex) => self.true_pos += 1,
            (Label::Complex, Label::NotComplex) => self.false_neg += 1,
            (Label::NotComplex, Label::Complex) => self.false_pos += 1,
            (Label::NotComplex, Label::NotComplex) => self.true_neg += 1,
        }
    }
}

impl fmt::Display for ConfusionMatrix {
    /// Rows = human, columns = model, with marginals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}{:>9}{:>13}{:>7}", "human \\ model", "Complex", "Not Complex", "Total")?;
        writeln!(
            f,
            "{:<14}{:>9}{:>13}{:>7}",
            "Complex",
            self.true_pos,
            self.false_neg,
            self.actual_complex()
        )?;
        writeln!(
            f,
            "{:<14}{:>9}{:>13}{:>7}",
            "Not Complex",
            self.false_pos,
            self.true_neg,
            self.actual_not_complex()
        )?;
        write!(
            f,
            "{:<14}{:>9}{:>13}{:>7}",
            "Total",
            self.predicted_complex(),
            self.predicted_not_complex(),
            self.total()
        )
    }
}

/// Counts paired (truth, prediction) labels.
pub fn confusion(truth: &[Label], pred: &[Label]) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        cm.add(t, p);
    }
    Ok(cm)
}

/// A ratio that may be undefined (zero denominator). Serialized as a number
/// or the string `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metric(pub Option<f64>);

impl Metric {
    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn or_zero(self) -> f64 {
        self.0.unwrap_or(0.0)
    }

    fn ratio(num: u128, den: u128) -> Metric {
        Metric((den != 0).then(|| num as f64 / den as f64))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.4}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Metric(Some(v))),
            Raw::Text(t) if t == "undefined" => Ok(Metric(None)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad metric `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Support {
    pub complex: u64,
    pub not_complex: u64,
    pub predicted_complex: u64,
    pub total: u64,
}

/// Precision, recall, F1 and Cohen's kappa for one confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
    pub cohen_kappa: Metric,
    pub support: Support,
    pub notes: Vec<String>,
}

pub const DEFINITION_NOTES: [&str; 5] = [
    "positive class = Complex; rows = human, columns = model",
    "precision = TP / (TP + FP)",
    "recall = TP / (TP + FN)",
    "f1 = 2TP / (2TP + FP + FN), equal to 2PR / (P + R) whenever P + R > 0",
    "cohen_kappa = (p_o - p_e) / (1 - p_e), p_e from row and column marginals",
];

impl MetricsReport {
    /// Copy with undefined ratios replaced by 0, for batch tables.
    pub fn zero_filled(&self) -> MetricsReport {
        let fill = |m: Metric| Metric(Some(m.or_zero()));
        MetricsReport {
            precision: fill(self.precision),
            recall: fill(self.recall),
            f1: fill(self.f1),
            cohen_kappa: fill(self.cohen_kappa),
            support: self.support,
            notes: self.notes.clone(),
        }
    }

    pub fn values(&self) -> [Metric; 4] {
        [self.precision, self.recall, self.f1, self.cohen_kappa]
    }
}

pub const METRIC_NAMES: [&str; 4] = ["precision", "recall", "f1", "cohen_kappa"];

/// Derives every ratio from the counts alone.
pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let n = cm.total() as u128;
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let tp = cm.true_pos as u128;
    let fp = cm.false_pos as u128;
    let fn_ = cm.false_neg as u128;
    let tn = cm.true_neg as u128;

    let precision = Metric::ratio(tp, tp + fp);
    let recall = Metric::ratio(tp, tp + fn_);
    let f1 = Metric::ratio(2 * tp, 2 * tp + fp + fn_);

    // kappa = (n * agree - chance) / (n^2 - chance), all in integers
    let chance = (tp + fn_) * (tp + fp) + (fp + tn) * (fn_ + tn);
    let agree = tp + tn;
    let denominator = n * n - chance;
    let cohen_kappa = if denominator == 0 {
        Metric(None)
    } else {
        Metric(Some((n as f64 * agree as f64 - chance as f64) / denominator as f64))
    };

    let mut notes: Vec<String> = DEFINITION_NOTES.iter().map(|s| s.to_string()).collect();
    for (name, m) in METRIC_NAMES.iter().zip([precision, recall, f1, cohen_kappa]) {
        if m.0.is_none() {
            notes.push(format!("{name} undefined: zero denominator"));
        }
    }
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        cohen_kappa,
        support: Support {
            complex: cm.actual_complex(),
            not_complex: cm.actual_not_complex(),
            predicted_complex: cm.predicted_complex(),
            total: cm.total(),
        },
        notes,
    })
}

/// One threshold of a score sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: u8,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// Metrics for each score-to-binary threshold.
pub fn threshold_sweep(
    scores: &[u8],
    truth: &[Label],
    thresholds: RangeInclusive<u8>,
) -> Result<Vec<SweepRow>, MetricsError> {
    thresholds
        .map(|threshold| {
            let pred = scores
                .iter()
                .map(|&s| to_binary(s, threshold).map(|b| b.label))
                .collect::<Result<Vec<_>, _>>()?;
            let confusion = confusion(truth, &pred)?;
            let metrics = classification_metrics(&confusion)?;
            Ok(SweepRow { threshold, confusion, metrics })
        })
        .collect()
}

/// Change between two metric values.
pub fn absolute_change(old: Metric, new: Metric) -> Option<f64> {
    Some(new.0? - old.0?)
}

/// `(new - old) / old`, defined only when `old > 0`.
pub fn relative_change(old: Metric, new: Metric) -> Option<f64> {
    let (o, n) = (old.0?, new.0?);
    (o > 0.0).then(|| (n - o) / o)
}

fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// `+0.1659`, `-0.0100`, or an em dash when undefined.
pub fn format_absolute(change: Option<f64>) -> String {
    match change {
        Some(v) if v.abs() < 5e-5 => "0.0000".to_string(),
        Some(v) => format!("{:+.4}", (v * 1e4).round() / 1e4),
        None => "\u{2014}".to_string(),
    }
}

/// `+83%`, `+1,371%`, `0%`, or an em dash when undefined.
pub fn format_relative(change: Option<f64>) -> String {
    match change {
        Some(v) => {
            let pct = (v * 100.0).round();
            if pct == 0.0 {
                "0%".to_string()
            } else {
                let sign = if pct > 0.0 { '+' } else { '-' };
                format!("{sign}{}%", group_thousands(pct.abs() as u64))
            }
        }
        None => "\u{2014}".to_string(),
    }
}

/// Method rows, metric columns and improvement rows of a two-protocol
/// comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline_name: String,
    pub baseline: MetricsReport,
    pub candidate_name: String,
    pub candidate: MetricsReport,
    pub absolute_improvement: [Option<f64>; 4],
    pub relative_improvement: [Option<f64>; 4],
}

impl ComparisonTable {
    pub fn new(
        baseline_name: impl Into<String>,
        baseline: MetricsReport,
        candidate_name: impl Into<String>,
        candidate: MetricsReport,
    ) -> Self {
        let old = baseline.values();
        let new = candidate.values();
        let absolute_improvement = std::array::from_fn(|i| absolute_change(old[i], new[i]));
        let relative_improvement = std::array::from_fn(|i| relative_change(old[i], new[i]));
        Self {
            baseline_name: baseline_name.into(),
            baseline,
            candidate_name: candidate_name.into(),
            candidate,
            absolute_improvement,
            relative_improvement,
        }
    }

    /// Plain-text table with rows in the order baseline, candidate,
    /// absolute, relative.
    pub fn render_text(&self) -> String {
        let header = ["Method", "Precision", "Recall", "F1-Score", "Cohen's Kappa"];
        let mut rows: Vec<[String; 5]> = Vec::new();
        for (name, r) in [(&self.baseline_name, &self.baseline), (&self.candidate_name, &self.candidate)] {
            let v = r.values();
            rows.push([
                name.clone(),
                v[0].to_string(),
                v[1].to_string(),
                v[2].to_string(),
                v[3].to_string(),
            ]);
        }
        let abs = self.absolute_improvement.map(format_absolute);
        rows.push([
            "Absolute Improvement".into(),
            abs[0].clone(),
            abs[1].clone(),
            abs[2].clone(),
            abs[3].clone(),
        ]);
        let rel = self.relative_improvement.map(format_relative);
        rows.push([
            "Relative Improvement".into(),
            rel[0].clone(),
            rel[1].clone(),
            rel[2].clone(),
            rel[3].clone(),
        ]);

        let mut widths = header.map(|h| h.chars().count());
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: [&str; 5]| -> String {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                let pad = w - cell.chars().count();
                if i == 0 {
                    s.push_str(cell);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(cell);
                }
            }
            s.trim_end().to_string()
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        let mut out = String::new();
        out.push_str(&line(header));
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for (i, row) in rows.iter().enumerate() {
            if i == 2 {
                out.push_str(&rule);
                out.push('\n');
            }
            out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4]]));
            out.push('\n');
        }
        out
    }
}
