//! Comparison report for a pair of runs over the same corpus.
//!
//! Markdown and JSON are rendered from one [`FullReport`] value. No wall
//! clock enters the report, so regenerating it from stored runs is
//! byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{driver_frequency, Driver, DriverFrequency, GroundTruth};
use crate::corpus::{Category, EvalRun, Label, Protocol, Sample};
use crate::dtree::{
    extract_rules, importance, render_rules_table, stratified_cv, train, CvReport, DecisionTree, FeatureVector,
    ImportanceVector, NotSureEncoding, Rule, TreeError, TreeParams, TreeTarget,
};
use crate::metrics::baseline::reference_notes;
use crate::metrics::{
    classification_metrics, confusion, format_absolute, format_relative, mcnemar, ComparisonTable,
    ConfusionMatrix, McNemarResult, MetricsError, MetricsReport,
};
use crate::parser::Answer;

/// Explanation excerpts are cut to this many characters.
pub const EXCERPT_CHARS: usize = 300;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("runs cover different samples ({only_baseline} only in `{baseline}`, {only_candidate} only in `{candidate}`)")]
    SampleSetMismatch {
        baseline: String,
        candidate: String,
        only_baseline: usize,
        only_candidate: usize,
    },
    #[error("runs use different thresholds ({0} vs {1})")]
    ThresholdMismatch(u8, u8),
    #[error("no sample has a consensus label and a prediction from both runs")]
    NothingToCompare,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("cannot write report to {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl ReportError {
    pub fn class(&self) -> &'static str {
        match self {
            ReportError::SampleSetMismatch { .. } => "sample_set_mismatch",
            ReportError::ThresholdMismatch(..) => "threshold_mismatch",
            ReportError::NothingToCompare => "nothing_to_compare",
            ReportError::Metrics(_) => "metrics",
            ReportError::Tree(_) => "tree",
            ReportError::Io { .. } => "io",
        }
    }
}

/// Run-level facts and metrics for one side of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub run_id: String,
    pub protocol: Protocol,
    pub model_id: String,
    pub prompt_digest: String,
    pub temperature: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    /// Records without a usable prediction.
    pub failed_records: usize,
}

/// A sample left out of the paired evaluation, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub sample_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementText {
    pub absolute: [String; 4],
    pub relative: [String; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: ProtocolSummary,
    pub candidate: ProtocolSummary,
    pub table: ComparisonTable,
    pub improvement_text: ImprovementText,
    pub threshold: u8,
    /// Samples in the paired evaluation, sorted.
    pub evaluated: Vec<String>,
    pub excluded: Vec<Exclusion>,
    /// Deviations of recomputed metrics from published reference figures.
    pub reference_notes: Vec<String>,
}

fn summary(run: &EvalRun, truth: &[Label], pred: &[Label]) -> Result<ProtocolSummary, ReportError> {
    let cm = confusion(truth, pred)?;
    Ok(ProtocolSummary {
        run_id: run.run_id.clone(),
        protocol: run.protocol,
        model_id: run.model_id.clone(),
        prompt_digest: run.prompt_digest.clone(),
        temperature: run.temperature,
        confusion: cm,
        metrics: classification_metrics(&cm)?,
        failed_records: run.records.iter().filter(|r| r.prediction.is_none()).count(),
    })
}

fn display_name(protocol: Protocol) -> &'static str {
    match protocol {
        Protocol::Standard => "Standard Gestalt Prompting",
        Protocol::Diagnostic => "Diagnostic Prompting",
    }
}

/// Metrics for both runs over the samples where both produced a prediction
/// and a consensus label exists.
pub fn build_comparison(
    baseline: &EvalRun,
    candidate: &EvalRun,
    truth: &GroundTruth,
) -> Result<ComparisonReport, ReportError> {
    let a: BTreeSet<&str> = baseline.sample_ids().into_iter().collect();
    let b: BTreeSet<&str> = candidate.sample_ids().into_iter().collect();
    if a != b {
        return Err(ReportError::SampleSetMismatch {
            baseline: baseline.run_id.clone(),
            candidate: candidate.run_id.clone(),
            only_baseline: a.difference(&b).count(),
            only_candidate: b.difference(&a).count(),
        });
    }
    if baseline.threshold != candidate.threshold {
        return Err(ReportError::ThresholdMismatch(baseline.threshold, candidate.threshold));
    }

    let mut evaluated = Vec::new();
    let mut excluded = Vec::new();
    let (mut t, mut pa, mut pb) = (Vec::new(), Vec::new(), Vec::new());
    for id in &a {
        let ra = baseline.record(id).expect("id from run");
        let rb = candidate.record(id).expect("same sample set");
        let reason = match (truth.get(id), ra.predicted_label(), rb.predicted_label()) {
            (Some(h), Some(x), Some(y)) => {
                evaluated.push(id.to_string());
                t.push(h.label);
                pa.push(x);
                pb.push(y);
                continue;
            }
            (None, _, _) => "no consensus label".to_string(),
            (_, None, _) => format!("no prediction in `{}`", baseline.run_id),
            (_, _, None) => format!("no prediction in `{}`", candidate.run_id),
        };
        excluded.push(Exclusion { sample_id: id.to_string(), reason });
    }
    if evaluated.is_empty() {
        return Err(ReportError::NothingToCompare);
    }
    let base = summary(baseline, &t, &pa)?;
    let cand = summary(candidate, &t, &pb)?;
    let mut notes = reference_notes(baseline.protocol, &base.confusion);
    notes.extend(reference_notes(candidate.protocol, &cand.confusion));

    let table = ComparisonTable::new(
        display_name(baseline.protocol),
        base.metrics.clone(),
        display_name(candidate.protocol),
        cand.metrics.clone(),
    );
    let improvement_text = ImprovementText {
        absolute: table.absolute_improvement.map(format_absolute),
        relative: table.relative_improvement.map(format_relative),
    };
    Ok(ComparisonReport {
        baseline: base,
        candidate: cand,
        table,
        improvement_text,
        threshold: baseline.threshold,
        evaluated,
        excluded,
        reference_notes: notes,
    })
}

/// Human citations and the model's answer for one catalog driver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverAnswer {
    pub driver: Driver,
    pub question: u8,
    pub human_citations: usize,
    pub model_answer: Option<Answer>,
}

/// One human/model disagreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCase {
    pub sample_id: String,
    pub query: String,
    pub category: Option<Category>,
    pub human_label: Label,
    pub unanimous: bool,
    pub complex_votes: usize,
    pub total_votes: usize,
    pub complex_fraction: f64,
    pub model_label: Label,
    pub model_score: Option<u8>,
    pub cited_drivers: Vec<Driver>,
    /// All catalog drivers, catalog order.
    pub driver_answers: Vec<DriverAnswer>,
    pub explanation_excerpt: String,
}

impl FailureCase {
    /// Humans unanimously Complex, model NotComplex.
    pub fn is_unanimous_miss(&self) -> bool {
        self.unanimous && self.human_label == Label::Complex && self.model_label == Label::NotComplex
    }
}

/// First `EXCERPT_CHARS` characters, with an ellipsis when cut.
pub fn excerpt(text: &str) -> String {
    let mut chars = text.chars();
    let head: String = chars.by_ref().take(EXCERPT_CHARS).collect();
    if chars.next().is_some() {
        format!("{head}\u{2026}")
    } else {
        head
    }
}

/// Disagreements between `run` and the consensus.
///
/// Unanimous human-Complex / model-NotComplex cases come first, then the
/// rest by descending complex-vote fraction, then by sample id.
pub fn failure_queue(
    run: &EvalRun,
    truth: &GroundTruth,
    samples: &[Sample],
    require_unanimity: bool,
) -> Vec<FailureCase> {
    let by_id: BTreeMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut cases: Vec<FailureCase> = run
        .records
        .iter()
        .filter_map(|record| {
            let human = truth.get(&record.sample_id)?;
            let model_label = record.predicted_label()?;
            if model_label == human.label || (require_unanimity && !human.unanimity) {
                return None;
            }
            let assessment = record.assessment();
            let answers = assessment.and_then(|a| a.as_diagnostic()).map(|d| &d.answers);
            let sample = by_id.get(record.sample_id.as_str());
            Some(FailureCase {
                sample_id: record.sample_id.clone(),
                query: sample.map(|s| s.query.clone()).unwrap_or_default(),
                category: sample.map(|s| s.category),
                human_label: human.label,
                unanimous: human.unanimity,
                complex_votes: human.complex_votes,
                total_votes: human.total_votes,
                complex_fraction: human.complex_fraction(),
                model_label,
                model_score: assessment.map(|a| a.complexity_score()),
                cited_drivers: human.cited_drivers(),
                driver_answers: Driver::CATALOG
                    .iter()
                    .map(|&d| DriverAnswer {
                        driver: d,
                        question: d.question(),
                        human_citations: human.driver_counts.get(&d).copied().unwrap_or(0),
                        model_answer: answers.and_then(|a| a.get(d.question())),
                    })
                    .collect(),
                explanation_excerpt: assessment.map(|a| excerpt(a.explanation())).unwrap_or_default(),
            })
        })
        .collect();
    cases.sort_by(|x, y| {
        y.is_unanimous_miss()
            .cmp(&x.is_unanimous_miss())
            .then(y.complex_fraction.total_cmp(&x.complex_fraction))
            .then_with(|| x.sample_id.cmp(&y.sample_id))
    });
    cases
}

/// Failure queue as CSV for the review UI.
pub fn write_failures_csv<W: io::Write>(cases: &[FailureCase], writer: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "sample_id",
        "query",
        "human_label",
        "unanimous",
        "complex_votes",
        "total_votes",
        "model_label",
        "model_score",
        "cited_drivers",
        "explanation_excerpt",
    ])?;
    for c in cases {
        let drivers: Vec<&str> = c.cited_drivers.iter().map(|d| d.name()).collect();
        out.write_record([
            c.sample_id.clone(),
            c.query.clone(),
            c.human_label.to_string(),
            c.unanimous.to_string(),
            c.complex_votes.to_string(),
            c.total_votes.to_string(),
            c.model_label.to_string(),
            c.model_score.map(|s| s.to_string()).unwrap_or_default(),
            drivers.join(";"),
            c.explanation_excerpt.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Human driver ranking next to the tree importance of its question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub driver: Driver,
    pub description: String,
    pub question: u8,
    pub human_count: usize,
    pub human_rank: usize,
    pub importance: f64,
    /// Rank among the catalog questions, 1 = most important.
    pub importance_rank: usize,
}

/// One row per catalog driver, catalog order.
pub fn alignment_table(importances: &ImportanceVector, freq: &[DriverFrequency]) -> Vec<AlignmentRow> {
    let mut by_importance: Vec<Driver> = Driver::CATALOG.to_vec();
    by_importance.sort_by(|a, b| importances.question(b.question()).total_cmp(&importances.question(a.question())));
    Driver::CATALOG
        .iter()
        .map(|&d| {
            let f = freq.iter().find(|f| f.driver == d);
            AlignmentRow {
                driver: d,
                description: d.description().to_string(),
                question: d.question(),
                human_count: f.map_or(0, |f| f.count),
                human_rank: f.map_or(0, |f| f.rank),
                importance: importances.question(d.question()),
                importance_rank: by_importance.iter().position(|&x| x == d).expect("catalog member") + 1,
            }
        })
        .collect()
}

/// Tree training inputs drawn from a diagnostic run.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDataset {
    pub sample_ids: Vec<String>,
    pub features: Vec<FeatureVector>,
    pub targets: Vec<Label>,
}

/// Samples of `run` with parsed diagnostic answers and a target label.
pub fn tree_dataset(run: &EvalRun, truth: &GroundTruth, encoding: NotSureEncoding, target: TreeTarget) -> TreeDataset {
    let mut ds = TreeDataset { sample_ids: Vec::new(), features: Vec::new(), targets: Vec::new() };
    for record in &run.records {
        let Some(diag) = record.assessment().and_then(|a| a.as_diagnostic()) else { continue };
        let label = match target {
            TreeTarget::Human => truth.get(&record.sample_id).map(|c| c.label),
            TreeTarget::Model => record.predicted_label(),
        };
        let Some(label) = label else { continue };
        ds.sample_ids.push(record.sample_id.clone());
        ds.features.push(FeatureVector::from_answers(&diag.answers, encoding));
        ds.targets.push(label);
    }
    ds
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeSettings {
    pub params: TreeParams,
    pub encoding: NotSureEncoding,
    pub target: TreeTarget,
    pub cv_folds: usize,
    pub cv_seed: u64,
}

impl Default for TreeSettings {
    fn default() -> Self {
        Self {
            params: TreeParams::default(),
            encoding: NotSureEncoding::default(),
            target: TreeTarget::default(),
            cv_folds: 5,
            cv_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub question: u8,
    pub driver: Option<Driver>,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSection {
    pub run_id: String,
    pub settings: TreeSettings,
    pub samples: usize,
    pub rules: Vec<Rule>,
    pub rules_table: String,
    /// Nonzero importances, descending.
    pub importances: Vec<ImportanceRow>,
    pub cv: Option<CvReport>,
    pub notes: Vec<String>,
}

/// A trained tree with its report section.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeArtifacts {
    pub section: TreeSection,
    pub tree: DecisionTree,
    pub importance: ImportanceVector,
}

/// Trains, explains and cross-validates a tree on a diagnostic run.
pub fn tree_section(run: &EvalRun, truth: &GroundTruth, settings: TreeSettings) -> Result<TreeArtifacts, ReportError> {
    let ds = tree_dataset(run, truth, settings.encoding, settings.target);
    let tree = train(&ds.features, &ds.targets, settings.params)?;
    let rules = extract_rules(&tree);
    let imp = importance(&tree);
    let mut importances: Vec<ImportanceRow> = (1..=imp.0.len() as u8)
        .filter(|&q| imp.question(q) > 0.0)
        .map(|q| ImportanceRow { question: q, driver: Driver::for_question(q), importance: imp.question(q) })
        .collect();
    importances.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.question.cmp(&b.question)));
    let mut notes = Vec::new();
    let cv = match stratified_cv(&ds.features, &ds.targets, settings.cv_folds, settings.params, settings.cv_seed) {
        Ok(cv) => Some(cv),
        Err(e @ (TreeError::TooFewInClass { .. } | TreeError::InvalidFolds(_))) => {
            notes.push(format!("cross-validation skipped: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let section = TreeSection {
        run_id: run.run_id.clone(),
        settings,
        samples: ds.features.len(),
        rules_table: render_rules_table(&rules),
        rules,
        importances,
        cv,
        notes,
    };
    Ok(TreeArtifacts { section, tree, importance: imp })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub comparison: ComparisonReport,
    /// Paired correctness, baseline vs candidate.
    pub mcnemar: McNemarResult,
    pub driver_frequency: Vec<DriverFrequency>,
    pub tree: Option<TreeSection>,
    pub alignment: Vec<AlignmentRow>,
    pub failures: Vec<FailureCase>,
}

/// Everything in one pass: comparison, McNemar, tree, alignment and the
/// candidate run's failure queue. The tree is trained on whichever run is
/// diagnostic, preferring the candidate.
pub fn build_report(
    baseline: &EvalRun,
    candidate: &EvalRun,
    truth: &GroundTruth,
    samples: &[Sample],
    tree_settings: TreeSettings,
) -> Result<FullReport, ReportError> {
    let comparison = build_comparison(baseline, candidate, truth)?;
    let correct = |run: &EvalRun| -> Vec<bool> {
        comparison
            .evaluated
            .iter()
            .map(|id| run.record(id).and_then(|r| r.predicted_label()) == truth.get(id).map(|c| c.label))
            .collect()
    };
    let mcnemar = mcnemar(&correct(baseline), &correct(candidate))?;
    let freq = driver_frequency(&truth.consensus_labels());

    let diag_run = [candidate, baseline].into_iter().find(|r| r.protocol == Protocol::Diagnostic);
    let (tree, imp) = match diag_run {
        Some(run) if tree_dataset(run, truth, tree_settings.encoding, tree_settings.target).features.is_empty() => {
            (None, ImportanceVector([0.0; crate::parser::QUESTION_COUNT]))
        }
        Some(run) => {
            let a = tree_section(run, truth, tree_settings)?;
            (Some(a.section), a.importance)
        }
        None => (None, ImportanceVector([0.0; crate::parser::QUESTION_COUNT])),
    };
    Ok(FullReport {
        alignment: alignment_table(&imp, &freq),
        failures: failure_queue(candidate, truth, samples, false),
        driver_frequency: freq,
        mcnemar,
        tree,
        comparison,
    })
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}

impl FullReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let c = &self.comparison;
        let mut md = String::new();
        md.push_str("# Visual complexity evaluation\n\n");
        md.push_str("| | baseline | candidate |\n|---|---|---|\n");
        md.push_str(&format!("| run | `{}` | `{}` |\n", c.baseline.run_id, c.candidate.run_id));
        md.push_str(&format!("| protocol | {} | {} |\n", c.baseline.protocol, c.candidate.protocol));
        md.push_str(&format!("| model | {} | {} |\n", c.baseline.model_id, c.candidate.model_id));
        md.push_str(&format!("| temperature | {} | {} |\n", c.baseline.temperature, c.candidate.temperature));
        md.push_str(&format!(
            "| prompt sha256 | `{}` | `{}` |\n",
            c.baseline.prompt_digest, c.candidate.prompt_digest
        ));
        md.push_str(&format!(
            "| failed records | {} | {} |\n\n",
            c.baseline.failed_records, c.candidate.failed_records
        ));
        md.push_str(&format!(
            "Threshold: score <= {} is Complex. Evaluated samples: {}; excluded: {}.\n\n",
            c.threshold,
            c.evaluated.len(),
            c.excluded.len()
        ));

        md.push_str("## Metrics\n\n");
        md.push_str("| Method | Precision | Recall | F1-Score | Cohen's Kappa |\n|---|---:|---:|---:|---:|\n");
        for (name, r) in [(&c.table.baseline_name, &c.baseline.metrics), (&c.table.candidate_name, &c.candidate.metrics)] {
            let v = r.values();
            md.push_str(&format!("| {name} | {} | {} | {} | {} |\n", v[0], v[1], v[2], v[3]));
        }
        let [a0, a1, a2, a3] = &c.improvement_text.absolute;
        md.push_str(&format!("| Absolute Improvement | {a0} | {a1} | {a2} | {a3} |\n"));
        let [r0, r1, r2, r3] = &c.improvement_text.relative;
        md.push_str(&format!("| Relative Improvement | {r0} | {r1} | {r2} | {r3} |\n\n"));

        md.push_str("### Confusion matrices\n\nRows are human labels, columns model labels.\n\n");
        for s in [&c.baseline, &c.candidate] {
            let m = &s.confusion;
            md.push_str(&format!(
                "`{}`: TP {} / FN {} / FP {} / TN {}\n\n",
                s.run_id, m.true_pos, m.false_neg, m.false_pos, m.true_neg
            ));
        }
        if !c.reference_notes.is_empty() {
            md.push_str("### Reference notes\n\n");
            for n in &c.reference_notes {
                md.push_str(&format!("- {n}\n"));
            }
            md.push('\n');
        }

        let m = &self.mcnemar;
        md.push_str("## McNemar test\n\n");
        md.push_str(&format!(
            "b = {} (baseline right, candidate wrong), c = {} (baseline wrong, candidate right), statistic {:.4}, p = {:.4} ({:?})\n\n",
            m.b, m.c, m.statistic, m.p_value, m.method
        ));
        if let Some(note) = &m.note {
            md.push_str(&format!("{note}\n\n"));
        }

        md.push_str("## Decision tree\n\n");
        match &self.tree {
            None => md.push_str("No diagnostic answers available.\n\n"),
            Some(t) => {
                md.push_str(&format!(
                    "Trained on {} samples of `{}` (target: {}, max depth {}, min samples per leaf {}).\n\n",
                    t.samples,
                    t.run_id,
                    t.settings.target.as_str(),
                    t.settings.params.max_depth,
                    t.settings.params.min_samples_leaf
                ));
                md.push_str("| Path | Decision Rule | Predicted Class | Support |\n|---:|---|---|---:|\n");
                for (i, r) in t.rules.iter().enumerate() {
                    md.push_str(&format!("| {} | {} | {} | {} |\n", i + 1, r.condition_text(), r.label.display_name(), r.support));
                }
                md.push_str("\n| Question | Driver | Importance |\n|---|---|---:|\n");
                for row in &t.importances {
                    let driver = row.driver.map(|d| d.name()).unwrap_or("");
                    md.push_str(&format!("| Q{} | {driver} | {:.1}% |\n", row.question, row.importance * 100.0));
                }
                md.push('\n');
                if let Some(cv) = &t.cv {
                    md.push_str(&format!(
                        "{}-fold stratified cross-validation (seed {}): mean F1 {} (sd {}), mean kappa {} (sd {}).\n\n",
                        cv.k,
                        cv.seed,
                        fmt_opt(cv.mean.f1.value()),
                        fmt_opt(cv.std_dev.f1.value()),
                        fmt_opt(cv.mean.cohen_kappa.value()),
                        fmt_opt(cv.std_dev.cohen_kappa.value())
                    ));
                }
                for n in &t.notes {
                    md.push_str(&format!("- {n}\n"));
                }
            }
        }

        md.push_str("## Human drivers and tree importance\n\n");
        md.push_str("| Driver | Question | Human citations | Human rank | Importance | Importance rank |\n|---|---|---:|---:|---:|---:|\n");
        for r in &self.alignment {
            md.push_str(&format!(
                "| {} | Q{} | {} | {} | {:.1}% | {} |\n",
                r.description,
                r.question,
                r.human_count,
                r.human_rank,
                r.importance * 100.0,
                r.importance_rank
            ));
        }
        md.push('\n');

        md.push_str(&format!("## Failure queue ({} cases)\n\n", self.failures.len()));
        if !self.failures.is_empty() {
            md.push_str("| Sample | Query | Human | Votes | Model | Score | Cited drivers |\n|---|---|---|---:|---|---:|---|\n");
            for f in &self.failures {
                let drivers: Vec<&str> = f.cited_drivers.iter().map(|d| d.name()).collect();
                md.push_str(&format!(
                    "| {} | {} | {}{} | {}/{} | {} | {} | {} |\n",
                    f.sample_id,
                    md_escape(&f.query),
                    f.human_label,
                    if f.unanimous { " (unanimous)" } else { "" },
                    f.complex_votes,
                    f.total_votes,
                    f.model_label,
                    f.model_score.map(|s| s.to_string()).unwrap_or_default(),
                    drivers.join(", ")
                ));
            }
            md.push('\n');
        }
        if !c.excluded.is_empty() {
            md.push_str("## Excluded samples\n\n");
            for e in &c.excluded {
                md.push_str(&format!("- `{}`: {}\n", e.sample_id, e.reason));
            }
            md.push('\n');
        }
        md
    }

    /// Writes `report.md`, `report.json` and `failures.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), ReportError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ReportError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let md = dir.join("report.md");
        std::fs::write(&md, self.to_markdown()).map_err(io_err(&md))?;
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()).map_err(io_err(&json))?;
        let csv_path = dir.join("failures.csv");
        let mut buf = Vec::new();
        write_failures_csv(&self.failures, &mut buf)
            .map_err(|e| ReportError::Io { path: csv_path.clone(), source: io::Error::other(e) })?;
        std::fs::write(&csv_path, buf).map_err(io_err(&csv_path))?;
        Ok(())
    }
}

/// Directory name for a run pair.
pub fn pair_dir_name(baseline: &str, candidate: &str) -> String {
    format!("{baseline}__{candidate}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::ConsensusLabel;
    use crate::corpus::{Outcome, RunRecord, RunSettings};
    use crate::parser::{Answers, Assessment, BinaryPrediction, DiagnosticResponse, QUESTION_COUNT};

    fn settings() -> RunSettings {
        RunSettings {
            base_url: String::new(),
            max_output_tokens: 4096,
            sampling_seed: None,
            diagnostic_images: "first".into(),
            dispatch_mode: "replay".into(),
            session: None,
            max_concurrent: 1,
            created_at: chrono::DateTime::UNIX_EPOCH,
        }
    }

    fn record(id: &str, label: Label) -> RunRecord {
        let score = if label.is_complex() { 1 } else { 5 };
        let diag = DiagnosticResponse {
            answers: Answers([Answer::No; QUESTION_COUNT]),
            complexity_score: score,
            explanation: "x".repeat(400),
        };
        RunRecord {
            sample_id: id.into(),
            request_digest: None,
            temperature: 0.1,
            dispatch: None,
            outcome: Outcome::Parsed(Assessment::Diagnostic(diag)),
            repair_applied: false,
            prediction: Some(BinaryPrediction { label, source_score: score, threshold_used: 2 }),
        }
    }

    fn run(id: &str, protocol: Protocol, labels: &[(&str, Label)]) -> EvalRun {
        EvalRun {
            run_id: id.into(),
            protocol,
            model_id: "m".into(),
            temperature: 0.1,
            seed: 0,
            threshold: 2,
            prompt_digest: "p".into(),
            settings: settings(),
            records: labels.iter().map(|(s, l)| record(s, *l)).collect(),
        }
    }

    fn truth(votes: &[(&str, usize, usize)]) -> GroundTruth {
        let mut labels = BTreeMap::new();
        for &(id, complex, total) in votes {
            let label = if complex * 2 >= total { Label::Complex } else { Label::NotComplex };
            labels.insert(
                id.to_string(),
                ConsensusLabel {
                    sample_id: id.into(),
                    label,
                    complex_votes: complex,
                    total_votes: total,
                    unanimity: complex == 0 || complex == total,
                    tied: complex * 2 == total,
                    driver_counts: Driver::CATALOG.iter().map(|&d| (d, 0)).collect(),
                },
            );
        }
        GroundTruth { labels, complex: 0, not_complex: 0, skipped: vec![], warnings: vec![] }
    }

    use Label::{Complex as C, NotComplex as N};

    #[test]
    fn identical_runs_have_zero_improvement() {
        let t = truth(&[("a", 3, 3), ("b", 0, 3), ("c", 2, 3)]);
        let r = run("diagnostic-0001", Protocol::Diagnostic, &[("a", C), ("b", N), ("c", N)]);
        let cmp = build_comparison(&r, &r, &t).unwrap();
        assert_eq!(cmp.improvement_text.absolute, ["0.0000", "0.0000", "0.0000", "0.0000"].map(String::from));
        assert_eq!(cmp.improvement_text.relative, ["0%", "0%", "0%", "0%"].map(String::from));
    }

    #[test]
    fn zero_baseline_precision_gives_dash() {
        let t = truth(&[("a", 3, 3), ("b", 0, 3)]);
        let std = run("s", Protocol::Standard, &[("a", N), ("b", C)]);
        let diag = run("d", Protocol::Diagnostic, &[("a", C), ("b", N)]);
        let cmp = build_comparison(&std, &diag, &t).unwrap();
        assert_eq!(cmp.baseline.metrics.precision.value(), Some(0.0));
        assert_eq!(cmp.improvement_text.relative[0], "\u{2014}");
    }

    #[test]
    fn sample_sets_must_match() {
        let t = truth(&[("a", 3, 3)]);
        let a = run("s", Protocol::Standard, &[("a", C)]);
        let b = run("d", Protocol::Diagnostic, &[("a", C), ("b", C)]);
        assert_eq!(build_comparison(&a, &b, &t).unwrap_err().class(), "sample_set_mismatch");
    }

    #[test]
    fn queue_order_by_construction() {
        let t = truth(&[("p", 3, 5), ("q", 5, 5), ("r", 4, 5), ("s", 1, 5), ("ok", 5, 5)]);
        let r = run("d", Protocol::Diagnostic, &[("p", N), ("q", N), ("r", N), ("s", C), ("ok", C)]);
        let queue = failure_queue(&r, &t, &[], false);
        let ids: Vec<&str> = queue.iter().map(|c| c.sample_id.as_str()).collect();
        assert_eq!(ids, vec!["q", "r", "p", "s"]);
        assert!(queue[0].is_unanimous_miss());
        assert!(queue[0].explanation_excerpt.ends_with('\u{2026}'));
        assert_eq!(queue[0].explanation_excerpt.chars().count(), EXCERPT_CHARS + 1);
        assert_eq!(queue[0].driver_answers.len(), 7);
        let unanimous = failure_queue(&r, &t, &[], true);
        assert_eq!(unanimous.len(), 1);
    }

    #[test]
    fn no_disagreements_no_queue() {
        let t = truth(&[("a", 3, 3)]);
        let r = run("d", Protocol::Diagnostic, &[("a", C)]);
        assert!(failure_queue(&r, &t, &[], false).is_empty());
    }

    #[test]
    fn alignment_with_known_ranks() {
        let mut imp = [0.0; QUESTION_COUNT];
        imp[6] = 0.6; // Q7
        imp[1] = 0.3; // Q2
        imp[3] = 0.1; // Q4
        let freq: Vec<DriverFrequency> = Driver::CATALOG
            .iter()
            .enumerate()
            .map(|(i, &d)| DriverFrequency { driver: d, question: d.question(), count: 10 - i, rank: i + 1 })
            .collect();
        let rows = alignment_table(&ImportanceVector(imp), &freq);
        let got: Vec<(u8, usize, f64, usize)> =
            rows.iter().map(|r| (r.question, r.human_rank, r.importance, r.importance_rank)).collect();
        assert_eq!(
            got,
            vec![(4, 1, 0.1, 3), (5, 2, 0.0, 4), (2, 3, 0.3, 2), (6, 4, 0.0, 5), (7, 5, 0.6, 1), (15, 6, 0.0, 6), (3, 7, 0.0, 7)]
        );
        let zero = alignment_table(&ImportanceVector([0.0; QUESTION_COUNT]), &freq);
        assert!(zero.iter().all(|r| r.importance == 0.0));
    }

    #[test]
    fn excerpt_boundary() {
        assert_eq!(excerpt(&"a".repeat(300)), "a".repeat(300));
        assert_eq!(excerpt(&"é".repeat(301)).chars().count(), 301);
    }

    #[test]
    fn full_report_renders() {
        let t = truth(&[("a", 3, 3), ("b", 0, 3), ("c", 2, 3)]);
        let std = run("s", Protocol::Standard, &[("a", N), ("b", N), ("c", N)]);
        let diag = run("d", Protocol::Diagnostic, &[("a", C), ("b", N), ("c", N)]);
        let report = build_report(&std, &diag, &t, &[], TreeSettings::default()).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert!(report.to_markdown().contains("| Relative Improvement |"));
        let json = report.to_json();
        let back: FullReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_json(), json);
    }
}
