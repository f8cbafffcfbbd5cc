//! Typed parsing of raw model output for both prompting protocols, plus the
//! score-to-binary mapping.

mod diagnostic;
mod gestalt;
pub mod repair;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub use diagnostic::{parse_diagnostic, Answer, Answers, DiagnosticResponse, QUESTION_COUNT};
pub use gestalt::{parse_gestalt, GestaltAssessment, Principle};

/// Default score threshold: scores 1-2 map to Complex.
pub const DEFAULT_THRESHOLD: u8 = 2;

/// Typed parse failure. Serialized verbatim into run records.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseError {
    #[error("no parseable JSON block: {detail}")]
    NoParseableBlock { detail: String },
    #[error("field `{field}` is invalid: {detail}")]
    InvalidField { field: String, detail: String },
    #[error("missing field `{field}`")]
    MissingField { field: String },
    #[error("missing answer for Q{question}")]
    MissingQuestion { question: u8 },
    #[error("Q{question} answered more than once")]
    DuplicateQuestion { question: u8 },
    #[error("unexpected key `{key}` in diagnostics")]
    UnexpectedKey { key: String },
    #[error("Q{question}: `{value}` is not Yes / No / Not Sure")]
    InvalidAnswer { question: u8, value: String },
    #[error("{field} score {value} outside {min}..={max}")]
    ScoreOutOfRange { field: String, value: i64, min: u8, max: u8 },
    #[error("no score found for principle {principle}")]
    MissingPrincipleScore { principle: String },
    #[error("no `Result:` line with a final score")]
    MissingFinalScore,
}

impl ParseError {
    /// Stable machine-readable error class.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::NoParseableBlock { .. } => "no_parseable_block",
            ParseError::InvalidField { .. } => "invalid_field",
            ParseError::MissingField { .. } => "missing_field",
            ParseError::MissingQuestion { .. } => "missing_question",
            ParseError::DuplicateQuestion { .. } => "duplicate_question",
            ParseError::UnexpectedKey { .. } => "unexpected_key",
            ParseError::InvalidAnswer { .. } => "invalid_answer",
            ParseError::ScoreOutOfRange { .. } => "score_out_of_range",
            ParseError::MissingPrincipleScore { .. } => "missing_principle_score",
            ParseError::MissingFinalScore => "missing_final_score",
        }
    }
}

/// A parsed value and whether the repair pipeline was needed to get it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub repair_applied: bool,
}

/// Parsed output of either protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assessment {
    Diagnostic(DiagnosticResponse),
    Gestalt(GestaltAssessment),
}

impl Assessment {
    pub fn complexity_score(&self) -> u8 {
        match self {
            Assessment::Diagnostic(d) => d.complexity_score,
            Assessment::Gestalt(g) => g.final_score,
        }
    }

    pub fn as_diagnostic(&self) -> Option<&DiagnosticResponse> {
        match self {
            Assessment::Diagnostic(d) => Some(d),
            Assessment::Gestalt(_) => None,
        }
    }

    /// Free-text explanation or rationale.
    pub fn explanation(&self) -> &str {
        match self {
            Assessment::Diagnostic(d) => &d.explanation,
            Assessment::Gestalt(g) => &g.rationale_text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryPrediction {
    pub label: Label,
    pub source_score: u8,
    pub threshold_used: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BinaryError {
    #[error("score {0} outside 1..=5")]
    Score(u8),
    #[error("threshold {0} outside 1..=4")]
    Threshold(u8),
}

/// Complex iff `score <= threshold`.
pub fn to_binary(score: u8, threshold: u8) -> Result<BinaryPrediction, BinaryError> {
    if !(1..=5).contains(&score) {
        return Err(BinaryError::Score(score));
    }
    if !(1..=4).contains(&threshold) {
        return Err(BinaryError::Threshold(threshold));
    }
    let label = if score <= threshold { Label::Complex } else { Label::NotComplex };
    Ok(BinaryPrediction { label, source_score: score, threshold_used: threshold })
}

impl fmt::Display for Assessment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assessment::Diagnostic(d) => f.write_str(&d.to_json()),
            Assessment::Gestalt(g) => f.write_str(&g.rationale_text),
        }
    }
}
