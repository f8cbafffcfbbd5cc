//! Durable data model and the on-disk corpus store.
//!
//! A corpus is a plain directory:
//!
//! ```text
//! <root>/
//! ├── samples.jsonl          # one Sample per line, ingest order
//! ├── annotations.jsonl      # one Annotation per line
//! ├── images/<sha256>.<ext>  # content-addressed screenshot copies
//! ├── runs/<run_id>/         # config.json, responses.jsonl, predictions.jsonl
//! └── reports/<std>__<diag>/ # report.md, report.json, failures.csv
//! ```

mod run;
mod store;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::Driver;

pub use run::{DispatchRecord, EvalRun, Outcome, RecordError, RunRecord, RunSettings};
pub use store::{CorpusSummary, ManifestEntry, Review, ReviewVerdict, Store};

/// Binary complexity judgment. `Complex` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Complex,
    NotComplex,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Complex => "Complex",
            Label::NotComplex => "NotComplex",
        }
    }

    /// Spelling used in printed tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Label::Complex => "Complex",
            Label::NotComplex => "Not Complex",
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Complex => Label::NotComplex,
            Label::NotComplex => Label::Complex,
        }
    }

    pub fn is_complex(self) -> bool {
        self == Label::Complex
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Hardlines,
    Consumables,
    Softlines,
    Other,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::Hardlines, Category::Consumables, Category::Softlines, Category::Other];
}

/// Prompting protocol a run was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Standard,
    Diagnostic,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::Diagnostic => "diagnostic",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Protocol::Standard),
            "diagnostic" => Ok(Protocol::Diagnostic),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaType {
    Png,
    Jpeg,
}

impl MediaType {
    pub fn mime(self) -> &'static str {
        match self {
            MediaType::Png => "image/png",
            MediaType::Jpeg => "image/jpeg",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MediaType::Png => "png",
            MediaType::Jpeg => "jpg",
        }
    }
}

/// A stored screenshot. `path` is relative to the corpus root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: String,
    pub media_type: MediaType,
    pub sha256: String,
    pub width: u32,
    pub height: u32,
}

/// One search results page. Screenshots are top-to-bottom crops in stitch
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub query: String,
    pub category: Category,
    pub screenshots: Vec<ImageRef>,
    pub created_at: DateTime<Utc>,
}

pub const MAX_SCREENSHOTS: usize = 3;

/// One annotator's judgment of one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sample_id: String,
    pub annotator_id: String,
    pub label: Label,
    #[serde(default)]
    pub drivers: BTreeSet<Driver>,
    pub submitted_at: DateTime<Utc>,
}

impl Annotation {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.label == Label::NotComplex && !self.drivers.is_empty() {
            return Err(CorpusError::DriversWithoutComplex {
                sample: self.sample_id.clone(),
                annotator: self.annotator_id.clone(),
            });
        }
        Ok(())
    }
}

/// Annotation as submitted by a client, with drivers still as strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSubmission {
    #[serde(default)]
    pub sample_id: Option<String>,
    pub annotator_id: String,
    pub label: Label,
    #[serde(default)]
    pub drivers: Vec<String>,
    #[serde(default)]
    pub submitted_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub overwrite: bool,
}

impl AnnotationSubmission {
    /// Validates drivers against the catalog and fills in the timestamp.
    pub fn into_annotation(
        self,
        sample_id: &str,
        now: DateTime<Utc>,
    ) -> Result<Annotation, CorpusError> {
        if let Some(body_id) = &self.sample_id {
            if body_id != sample_id {
                return Err(CorpusError::SampleMismatch {
                    expected: sample_id.to_string(),
                    found: body_id.clone(),
                });
            }
        }
        if self.annotator_id.trim().is_empty() {
            return Err(CorpusError::InvalidAnnotation("annotator_id is empty".into()));
        }
        let drivers = self
            .drivers
            .iter()
            .map(|d| d.parse::<Driver>().map_err(|_| CorpusError::UnknownDriver(d.clone())))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let annotation = Annotation {
            sample_id: sample_id.to_string(),
            annotator_id: self.annotator_id,
            label: self.label,
            drivers,
            submitted_at: self.submitted_at.unwrap_or(now),
        };
        annotation.validate()?;
        Ok(annotation)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path} (line {line}): {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("sample `{sample}`: image file {path} not found")]
    MissingImage { sample: String, path: PathBuf },
    #[error("sample `{sample}`: unreadable image {path}: {reason}")]
    UnreadableImage { sample: String, path: PathBuf, reason: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),
    #[error("sample `{sample}` has {count} screenshots; at most 3 are allowed")]
    TooManyScreenshots { sample: String, count: usize },
    #[error("sample `{0}` has no screenshots")]
    NoScreenshots(String),
    #[error("unknown sample `{0}`")]
    UnknownSample(String),
    #[error("annotator `{annotator}` already annotated sample `{sample}`")]
    DuplicateAnnotation { sample: String, annotator: String },
    #[error("annotation by `{annotator}` on `{sample}` lists drivers but is not labeled Complex")]
    DriversWithoutComplex { sample: String, annotator: String },
    #[error("driver `{0}` is not in the catalog")]
    UnknownDriver(String),
    #[error("annotation body names sample `{found}` but was posted to `{expected}`")]
    SampleMismatch { expected: String, found: String },
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("run `{0}` already exists")]
    RunExists(String),
    #[error("run `{run}`: {file} digest mismatch (expected {expected}, found {actual})")]
    CorruptRun { run: String, file: String, expected: String, actual: String },
    #[error("image {path} no longer matches its recorded digest")]
    ImageDigestMismatch { path: PathBuf },
    #[error("invalid run: {0}")]
    InvalidRun(String),
}

impl CorpusError {
    /// Stable machine-readable error class.
    pub fn class(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "io",
            CorpusError::Json { .. } => "malformed_json",
            CorpusError::MissingImage { .. } => "missing_image",
            CorpusError::UnreadableImage { .. } => "unreadable_image",
            CorpusError::DuplicateSample(_) => "duplicate_sample",
            CorpusError::TooManyScreenshots { .. } => "too_many_screenshots",
            CorpusError::NoScreenshots(_) => "no_screenshots",
            CorpusError::UnknownSample(_) => "unknown_sample",
            CorpusError::DuplicateAnnotation { .. } => "duplicate_annotation",
            CorpusError::DriversWithoutComplex { .. } => "drivers_without_complex",
            CorpusError::UnknownDriver(_) => "unknown_driver",
            CorpusError::SampleMismatch { .. } => "sample_mismatch",
            CorpusError::InvalidAnnotation(_) => "invalid_annotation",
            CorpusError::UnknownRun(_) => "unknown_run",
            CorpusError::RunExists(_) => "run_exists",
            CorpusError::CorruptRun { .. } => "corrupt_run",
            CorpusError::ImageDigestMismatch { .. } => "image_digest_mismatch",
            CorpusError::InvalidRun(_) => "invalid_run",
        }
    }
}
