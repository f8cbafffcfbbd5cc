//! Human ground truth: majority-vote consensus over per-annotator judgments
//! and complexity-driver frequency statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Annotation, Label, Sample};

/// A human-cited reason a page feels complex.
///
/// The declaration order is the catalog order used for tie-breaking and for
/// every table the crate emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Driver {
    ProductsTooSimilar,
    TextSmallOrDense,
    ColorsTooLoud,
    BoxesPackedTogether,
    TooManyBadges,
    ProductsIrrelevant,
    FilterSectionCrowded,
}

impl Driver {
    /// The full catalog in catalog order.
    pub const CATALOG: [Driver; 7] = [
        Driver::ProductsTooSimilar,
        Driver::TextSmallOrDense,
        Driver::ColorsTooLoud,
        Driver::BoxesPackedTogether,
        Driver::TooManyBadges,
        Driver::ProductsIrrelevant,
        Driver::FilterSectionCrowded,
    ];

    /// Diagnostic question (1-based) that probes this driver.
    pub fn question(self) -> u8 {
        match self {
            Driver::ProductsTooSimilar => 4,
            Driver::TextSmallOrDense => 5,
            Driver::ColorsTooLoud => 2,
            Driver::BoxesPackedTogether => 6,
            Driver::TooManyBadges => 7,
            Driver::ProductsIrrelevant => 15,
            Driver::FilterSectionCrowded => 3,
        }
    }

    /// Inverse of [`Driver::question`].
    pub fn for_question(question: u8) -> Option<Driver> {
        Self::CATALOG.into_iter().find(|d| d.question() == question)
    }

    /// Wording shown to annotators.
    pub fn description(self) -> &'static str {
        match self {
            Driver::ProductsTooSimilar => "Products look too similar",
            Driver::TextSmallOrDense => "Text is small or too much to read",
            Driver::ColorsTooLoud => "Colors/highlights are too loud",
            Driver::BoxesPackedTogether => "Product boxes are packed together",
            Driver::TooManyBadges => "Too many badges, icons or labels",
            Driver::ProductsIrrelevant => "Products seem irrelevant",
            Driver::FilterSectionCrowded => "Filter section looks crowded",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Driver::ProductsTooSimilar => "ProductsTooSimilar",
            Driver::TextSmallOrDense => "TextSmallOrDense",
            Driver::ColorsTooLoud => "ColorsTooLoud",
            Driver::BoxesPackedTogether => "BoxesPackedTogether",
            Driver::TooManyBadges => "TooManyBadges",
            Driver::ProductsIrrelevant => "ProductsIrrelevant",
            Driver::FilterSectionCrowded => "FilterSectionCrowded",
        }
    }
}

impl fmt::Display for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Driver {
    type Err = ConsensusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Driver::CATALOG
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| ConsensusError::UnknownDriver(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("no annotations supplied")]
    Empty,
    #[error("annotations mix sample ids `{0}` and `{1}`")]
    MixedSamples(String, String),
    #[error("sample `{0}` has no annotations")]
    Unannotated(String),
    #[error("unknown complexity driver `{0}`")]
    UnknownDriver(String),
    #[error("quorum must lie in (0, 1], got {0}")]
    InvalidQuorum(String),
}

/// Aggregation rule. A sample is labeled Complex when the fraction of
/// Complex votes is at least `quorum`; the default 0.5 is a simple majority
/// in which an exact tie resolves to Complex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRule {
    pub quorum: f64,
}

impl Default for ConsensusRule {
    fn default() -> Self {
        Self { quorum: 0.5 }
    }
}

impl ConsensusRule {
    pub fn new(quorum: f64) -> Result<Self, ConsensusError> {
        if quorum > 0.0 && quorum <= 1.0 {
            Ok(Self { quorum })
        } else {
            Err(ConsensusError::InvalidQuorum(quorum.to_string()))
        }
    }

    fn decide(&self, complex_votes: usize, total_votes: usize) -> Label {
        // slack absorbs rounding in quorum * total at an exact boundary
        if complex_votes as f64 + 1e-9 >= self.quorum * total_votes as f64 {
            Label::Complex
        } else {
            Label::NotComplex
        }
    }
}

/// Aggregated human judgment for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusLabel {
    pub sample_id: String,
    pub label: Label,
    pub complex_votes: usize,
    pub total_votes: usize,
    pub unanimity: bool,
    /// True when the vote split exactly in half; such samples were decided
    /// by the tie rule and may be excluded from analyses.
    pub tied: bool,
    pub driver_counts: BTreeMap<Driver, usize>,
}

impl ConsensusLabel {
    pub fn complex_fraction(&self) -> f64 {
        self.complex_votes as f64 / self.total_votes as f64
    }

    /// Drivers cited at least once, most cited first, catalog order on ties.
    pub fn cited_drivers(&self) -> Vec<Driver> {
        let mut cited: Vec<(Driver, usize)> = self
            .driver_counts
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(&d, &n)| (d, n))
            .collect();
        cited.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        cited.into_iter().map(|(d, _)| d).collect()
    }
}

fn empty_driver_counts() -> BTreeMap<Driver, usize> {
    Driver::CATALOG.into_iter().map(|d| (d, 0)).collect()
}

/// Majority-vote consensus for the annotations of a single sample.
pub fn aggregate(annotations: &[Annotation]) -> Result<ConsensusLabel, ConsensusError> {
    aggregate_with(annotations, ConsensusRule::default())
}

pub fn aggregate_with(
    annotations: &[Annotation],
    rule: ConsensusRule,
) -> Result<ConsensusLabel, ConsensusError> {
    let first = annotations.first().ok_or(ConsensusError::Empty)?;
    let mut driver_counts = empty_driver_counts();
    let mut complex_votes = 0;
    for a in annotations {
        if a.sample_id != first.sample_id {
            return Err(ConsensusError::MixedSamples(
                first.sample_id.clone(),
                a.sample_id.clone(),
            ));
        }
        if a.label == Label::Complex {
            complex_votes += 1;
        }
        for d in &a.drivers {
            *driver_counts.entry(*d).or_default() += 1;
        }
    }
    let total_votes = annotations.len();
    Ok(ConsensusLabel {
        sample_id: first.sample_id.clone(),
        label: rule.decide(complex_votes, total_votes),
        complex_votes,
        total_votes,
        unanimity: complex_votes == 0 || complex_votes == total_votes,
        tied: complex_votes * 2 == total_votes,
        driver_counts,
    })
}

/// One row of the driver frequency ranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverFrequency {
    pub driver: Driver,
    pub question: u8,
    pub count: usize,
    /// 1-based; unique, ties broken by catalog order.
    pub rank: usize,
}

/// Ranks the catalog by total citations across all consensus labels.
pub fn driver_frequency(labels: &[ConsensusLabel]) -> Vec<DriverFrequency> {
    let mut totals = empty_driver_counts();
    for label in labels {
        for (d, n) in &label.driver_counts {
            *totals.entry(*d).or_default() += n;
        }
    }
    let mut rows: Vec<(Driver, usize)> = totals.into_iter().collect();
    // stable sort keeps catalog order among equal counts
    rows.sort_by_key(|r| std::cmp::Reverse(r.1));
    rows.into_iter()
        .enumerate()
        .map(|(i, (driver, count))| DriverFrequency {
            driver,
            question: driver.question(),
            count,
            rank: i + 1,
        })
        .collect()
}

/// Consensus labels for a whole corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: BTreeMap<String, ConsensusLabel>,
    pub complex: usize,
    pub not_complex: usize,
    /// Samples left out because they carry no annotation.
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
}

impl GroundTruth {
    pub fn get(&self, sample_id: &str) -> Option<&ConsensusLabel> {
        self.labels.get(sample_id)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn consensus_labels(&self) -> Vec<ConsensusLabel> {
        self.labels.values().cloned().collect()
    }

    /// Consensus table as CSV: `sample_id,label,complex_votes,total_votes,unanimity`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["sample_id", "label", "complex_votes", "total_votes", "unanimity"])?;
        for c in self.labels.values() {
            out.write_record([
                c.sample_id.as_str(),
                c.label.as_str(),
                &c.complex_votes.to_string(),
                &c.total_votes.to_string(),
                if c.unanimity { "true" } else { "false" },
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the ground-truth table for `samples`.
///
/// With `skip_unannotated` unset, any sample without annotations is an
/// error; otherwise it is dropped and a warning is recorded.
pub fn ground_truth_table(
    samples: &[Sample],
    annotations: &[Annotation],
    rule: ConsensusRule,
    skip_unannotated: bool,
) -> Result<GroundTruth, ConsensusError> {
    let wanted: HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    let mut by_sample: BTreeMap<&str, Vec<Annotation>> = BTreeMap::new();
    for a in annotations {
        if wanted.contains(a.sample_id.as_str()) {
            by_sample.entry(a.sample_id.as_str()).or_default().push(a.clone());
        }
    }

    let mut truth = GroundTruth {
        labels: BTreeMap::new(),
        complex: 0,
        not_complex: 0,
        skipped: Vec::new(),
        warnings: Vec::new(),
    };
    for sample in samples {
        match by_sample.get(sample.id.as_str()) {
            Some(group) => {
                let label = aggregate_with(group, rule)?;
                match label.label {
                    Label::Complex => truth.complex += 1,
                    Label::NotComplex => truth.not_complex += 1,
                }
                truth.labels.insert(sample.id.clone(), label);
            }
            None if skip_unannotated => {
                truth
                    .warnings
                    .push(format!("sample `{}` has no annotations; skipped", sample.id));
                truth.skipped.push(sample.id.clone());
            }
            None => return Err(ConsensusError::Unannotated(sample.id.clone())),
        }
    }
    Ok(truth)
}
