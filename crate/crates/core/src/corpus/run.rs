use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Label, Protocol};
use crate::parser::{Assessment, BinaryPrediction, ParseError};

/// Settings snapshot recorded with every run. Everything here is written to
/// `config.json` alongside the top-level run fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub base_url: String,
    pub max_output_tokens: u32,
    /// Seed forwarded to the endpoint, if any.
    pub sampling_seed: Option<u64>,
    /// How diagnostic requests used multi-screenshot samples.
    pub diagnostic_images: String,
    /// `live`, `record` or `replay`.
    pub dispatch_mode: String,
    pub session: Option<String>,
    pub max_concurrent: usize,
    pub created_at: DateTime<Utc>,
}

/// How the request for one sample went over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchRecord {
    Response {
        /// Full model output, byte-exact.
        raw_text: String,
        latency_ms: u64,
        attempt_count: u32,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordError {
    Render { message: String },
    Dispatch { message: String },
    Parse(ParseError),
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecordError::Render { message } => write!(f, "render failed: {message}"),
            RecordError::Dispatch { message } => write!(f, "dispatch failed: {message}"),
            RecordError::Parse(e) => write!(f, "parse failed: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Parsed(Assessment),
    Error(RecordError),
}

/// Per-sample result inside a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sample_id: String,
    pub request_digest: Option<String>,
    /// Temperature actually sent with this sample's request.
    pub temperature: f64,
    pub dispatch: Option<DispatchRecord>,
    pub outcome: Outcome,
    pub repair_applied: bool,
    pub prediction: Option<BinaryPrediction>,
}

impl RunRecord {
    pub fn predicted_label(&self) -> Option<Label> {
        self.prediction.as_ref().map(|p| p.label)
    }

    pub fn raw_text(&self) -> Option<&str> {
        match &self.dispatch {
            Some(DispatchRecord::Response { raw_text, .. }) => Some(raw_text),
            _ => None,
        }
    }

    pub fn assessment(&self) -> Option<&Assessment> {
        match &self.outcome {
            Outcome::Parsed(a) => Some(a),
            Outcome::Error(_) => None,
        }
    }
}

/// Model predictions for one prompting protocol over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub run_id: String,
    pub protocol: Protocol,
    pub model_id: String,
    pub temperature: f64,
    pub seed: u64,
    /// Score at or below which a prediction is Complex.
    pub threshold: u8,
    pub prompt_digest: String,
    pub settings: RunSettings,
    pub records: Vec<RunRecord>,
}

impl EvalRun {
    pub fn record(&self, sample_id: &str) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.sample_id == sample_id)
    }

    pub fn sample_ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.sample_id.as_str()).collect()
    }

    /// Checks that each sample appears once and that every request carried
    /// the run temperature.
    pub fn validate(&self) -> Result<(), super::CorpusError> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert(r.sample_id.as_str()) {
                return Err(super::CorpusError::InvalidRun(format!(
                    "sample `{}` appears more than once in run `{}`",
                    r.sample_id, self.run_id
                )));
            }
            if r.temperature != self.temperature {
                return Err(super::CorpusError::InvalidRun(format!(
                    "sample `{}` was sent temperature {} but the run records {}",
                    r.sample_id, r.temperature, self.temperature
                )));
            }
        }
        Ok(())
    }
}
