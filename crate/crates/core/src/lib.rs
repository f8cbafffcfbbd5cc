//! Evaluation harness for multimodal-model judgments of search results page
//! (SRP) visual complexity.
//!
//! The crate measures how well a model's complexity verdicts agree with a
//! human consensus, for two prompting protocols:
//!
//! * **Standard** - a single-shot prompt scoring six Gestalt principles and a
//!   final 1-5 complexity score, answered in free text.
//! * **Diagnostic** - 25 Yes / No / Not Sure layout questions followed by a
//!   1-5 complexity score, answered as strict JSON.
//!
//! Pipeline stages map onto modules:
//!
//! | stage | module |
//! |-------|--------|
//! | samples, screenshots, annotations, runs on disk | [`corpus`] |
//! | verbatim prompt texts and request rendering | [`prompts`] |
//! | chat-completions dispatch, retry, record/replay | [`client`] |
//! | typed parsing of raw model output | [`parser`] |
//! | human majority vote and driver statistics | [`consensus`] |
//! | confusion matrices, kappa, McNemar | [`metrics`] |
//! | CART trees on diagnostic answers | [`dtree`] |
//! | comparison report and failure queue | [`report`] |
//! | end-to-end orchestration | [`harness`] |
//! | annotation / review HTTP API | [`service`] |
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod client;
pub mod consensus;
pub mod corpus;
pub mod digest;
pub mod dtree;
pub mod harness;
pub mod metrics;
pub mod parser;
pub mod prompts;
pub mod report;
pub mod service;
pub mod synth;

pub use consensus::{ConsensusLabel, Driver};
pub use corpus::{Annotation, Category, EvalRun, Label, Protocol, Sample, Store};
