//! End-to-end commands over a corpus directory. Each `cmd_*` function backs
//! one subcommand of the `layoutjudge` binary and can be called directly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ClientError, ModelClient, ModelEndpointConfig};
use crate::consensus::{ground_truth_table, ConsensusError, ConsensusRule, GroundTruth};
use crate::corpus::{
    CorpusError, CorpusSummary, DispatchRecord, EvalRun, Outcome, Protocol, RecordError, RunRecord, RunSettings,
    Store,
};
use crate::dtree::{DecisionTree, NotSureEncoding, TreeError, TreeParams, TreeTarget};
use crate::metrics::{
    classification_metrics, confusion, threshold_sweep, ComparisonTable, ConfusionMatrix, MetricsError,
    MetricsReport, SweepRow,
};
use crate::parser::{parse_diagnostic, parse_gestalt, to_binary, Assessment, DEFAULT_THRESHOLD};
use crate::prompts::{
    render, DiagnosticImages, PromptProtocol, SamplingConfig, DEFAULT_MAX_OUTPUT_TOKENS, DEFAULT_TEMPERATURE,
};
use crate::report::{build_comparison, build_report, pair_dir_name, tree_section, FullReport, ReportError, TreeSection, TreeSettings};

/// Where model replies come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchMode {
    #[default]
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub not_sure: NotSureEncoding,
    pub target: TreeTarget,
    pub cv_folds: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        let p = TreeParams::default();
        Self {
            max_depth: p.max_depth,
            min_samples_leaf: p.min_samples_leaf,
            not_sure: NotSureEncoding::default(),
            target: TreeTarget::default(),
            cv_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub port: u16,
    /// Bind all interfaces and require the shared token header.
    pub lan: bool,
    /// Environment variable holding the shared token in LAN mode.
    pub token_env: String,
    /// Static annotation UI to serve at `/`.
    pub ui_dir: Option<PathBuf>,
    /// Rubric text shown next to each screenshot.
    pub rubric: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            port: 8787,
            lan: false,
            token_env: "LAYOUTJUDGE_SERVE_TOKEN".into(),
            ui_dir: None,
            rubric: None,
        }
    }
}

/// Everything a command needs. Defaults work offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub corpus_root: PathBuf,
    pub endpoint: ModelEndpointConfig,
    /// Protocols `evaluate` runs when none is named.
    pub protocols: Vec<Protocol>,
    pub threshold: u8,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub sampling_seed: Option<u64>,
    pub diagnostic_images: DiagnosticImages,
    /// Seed for cross-validation folds; recorded with every run.
    pub seed: u64,
    pub consensus_quorum: f64,
    /// Leave unannotated samples out of ground truth instead of failing.
    pub skip_unannotated: bool,
    pub tree: TreeConfig,
    pub mode: DispatchMode,
    pub session: Option<PathBuf>,
    /// Prompt text files replacing the built-in prompts.
    pub prompt_files: BTreeMap<Protocol, PathBuf>,
    pub serve: ServeConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            corpus_root: PathBuf::from("corpus"),
            endpoint: ModelEndpointConfig::default(),
            protocols: vec![Protocol::Standard, Protocol::Diagnostic],
            threshold: DEFAULT_THRESHOLD,
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            sampling_seed: None,
            diagnostic_images: DiagnosticImages::default(),
            seed: 0,
            consensus_quorum: 0.5,
            skip_unannotated: false,
            tree: TreeConfig::default(),
            mode: DispatchMode::default(),
            session: None,
            prompt_files: BTreeMap::new(),
            serve: ServeConfig::default(),
        }
    }
}

impl HarnessConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: HarnessConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(1..=4).contains(&self.threshold) {
            return bad(format!("threshold {} outside 1..=4", self.threshold));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside 0..=2", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive".into());
        }
        ConsensusRule::new(self.consensus_quorum).map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.tree.max_depth == 0 {
            return bad("tree.max_depth must be at least 1".into());
        }
        if self.tree.cv_folds < 2 {
            return bad("tree.cv_folds must be at least 2".into());
        }
        self.endpoint.validate()?;
        match (self.mode, &self.session) {
            (DispatchMode::Replay, None) => return bad("replay mode needs a session path".into()),
            (DispatchMode::Replay, Some(p)) if !p.is_file() => {
                return bad(format!("replay session {} does not exist", p.display()))
            }
            (DispatchMode::Record, None) => return bad("record mode needs a session path".into()),
            _ => {}
        }
        Ok(())
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            seed: self.sampling_seed,
        }
    }

    pub fn tree_settings(&self) -> TreeSettings {
        TreeSettings {
            params: TreeParams {
                max_depth: self.tree.max_depth,
                min_samples_leaf: self.tree.min_samples_leaf,
                seed: self.seed,
            },
            encoding: self.tree.not_sure,
            target: self.tree.target,
            cv_folds: self.tree.cv_folds,
            cv_seed: self.seed,
        }
    }

    pub fn prompt(&self, protocol: Protocol) -> Result<PromptProtocol, HarnessError> {
        match self.prompt_files.get(&protocol) {
            None => Ok(PromptProtocol::builtin(protocol)),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Config(format!("prompt file {}: {e}", path.display())))?;
                Ok(PromptProtocol::custom(protocol, text))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Prerequisite(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    /// Machine-readable class printed as `error[<class>]`.
    pub fn class(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Prerequisite(_) => "missing_prerequisite",
            HarnessError::Corpus(e) => e.class(),
            HarnessError::Client(e) => e.class(),
            HarnessError::Consensus(_) => "consensus",
            HarnessError::Metrics(_) => "metrics",
            HarnessError::Tree(_) => "tree",
            HarnessError::Report(e) => e.class(),
            HarnessError::Io { .. } => "io",
        }
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub fn open_store(cfg: &HarnessConfig) -> Result<Store, HarnessError> {
    Ok(Store::open(&cfg.corpus_root)?)
}

/// Consensus labels for every sample in the store.
pub fn ground_truth(cfg: &HarnessConfig, store: &Store) -> Result<GroundTruth, HarnessError> {
    let rule = ConsensusRule::new(cfg.consensus_quorum)?;
    Ok(ground_truth_table(store.samples(), store.annotations(), rule, cfg.skip_unannotated)?)
}

pub fn cmd_ingest(cfg: &HarnessConfig, manifest: &Path) -> Result<CorpusSummary, HarnessError> {
    let mut store = open_store(cfg)?;
    Ok(store.ingest_manifest(manifest)?)
}

pub fn cmd_import_annotations(cfg: &HarnessConfig, path: &Path, overwrite: bool) -> Result<usize, HarnessError> {
    let mut store = open_store(cfg)?;
    Ok(store.import_annotations(path, overwrite)?)
}

fn build_client(cfg: &HarnessConfig) -> Result<ModelClient, HarnessError> {
    let session = cfg.session.clone();
    Ok(match cfg.mode {
        DispatchMode::Live => ModelClient::live(cfg.endpoint.clone())?,
        DispatchMode::Record => ModelClient::recording(cfg.endpoint.clone(), session.expect("validated"))?,
        DispatchMode::Replay => ModelClient::replay(cfg.endpoint.clone(), session.expect("validated"))?,
    })
}

/// Parses a raw reply for `protocol` and maps it to a binary prediction.
pub fn interpret(protocol: Protocol, raw: &str, threshold: u8) -> (Outcome, bool, Option<crate::parser::BinaryPrediction>) {
    let parsed = match protocol {
        Protocol::Diagnostic => parse_diagnostic(raw).map(|p| (Assessment::Diagnostic(p.value), p.repair_applied)),
        Protocol::Standard => parse_gestalt(raw).map(|g| (Assessment::Gestalt(g), false)),
    };
    match parsed {
        Ok((assessment, repaired)) => {
            let prediction = to_binary(assessment.complexity_score(), threshold).ok();
            (Outcome::Parsed(assessment), repaired, prediction)
        }
        Err(e) => (Outcome::Error(RecordError::Parse(e)), false, None),
    }
}

/// Renders, dispatches and parses every sample, then stores a new run.
///
/// Each call creates a fresh run id. A replay miss or an authentication
/// problem aborts the run; other per-sample failures are recorded.
pub fn cmd_evaluate(cfg: &HarnessConfig, protocol: Protocol) -> Result<EvalRun, HarnessError> {
    cfg.validate()?;
    let store = open_store(cfg)?;
    if store.samples().is_empty() {
        return Err(HarnessError::Prerequisite("corpus has no samples; run ingest first".into()));
    }
    let prompt = cfg.prompt(protocol)?;
    let sampling = cfg.sampling();
    let client = build_client(cfg)?;

    let rendered: Vec<_> = store
        .samples()
        .iter()
        .map(|s| render(&store, s, &prompt, &sampling, cfg.diagnostic_images))
        .collect();
    let requests: Vec<_> = rendered.iter().filter_map(|r| r.as_ref().ok()).cloned().collect();
    let mut replies = client.complete_all(&requests).into_iter();

    let mut records = Vec::with_capacity(rendered.len());
    for (sample, render_result) in store.samples().iter().zip(rendered) {
        let base = |digest, dispatch, outcome, repair_applied, prediction| RunRecord {
            sample_id: sample.id.clone(),
            request_digest: digest,
            temperature: cfg.temperature,
            dispatch,
            outcome,
            repair_applied,
            prediction,
        };
        let req = match render_result {
            Ok(req) => req,
            Err(e) => {
                let err = RecordError::Render { message: e.to_string() };
                records.push(base(None, None, Outcome::Error(err), false, None));
                continue;
            }
        };
        let digest = Some(req.digest());
        match replies.next().expect("one reply per request") {
            Ok(resp) => {
                let (outcome, repaired, prediction) = interpret(protocol, &resp.raw_text, cfg.threshold);
                let dispatch = DispatchRecord::Response {
                    raw_text: resp.raw_text,
                    latency_ms: resp.latency_ms,
                    attempt_count: resp.attempt_count,
                };
                records.push(base(digest, Some(dispatch), outcome, repaired, prediction));
            }
            Err(e @ (ClientError::ReplayMiss { .. } | ClientError::Auth { .. } | ClientError::Session { .. })) => {
                return Err(e.into());
            }
            Err(e) => {
                let message = e.to_string();
                let dispatch = DispatchRecord::Failed { error: message.clone() };
                let err = RecordError::Dispatch { message };
                records.push(base(digest, Some(dispatch), Outcome::Error(err), false, None));
            }
        }
    }

    let run = EvalRun {
        run_id: store.next_run_id(protocol)?,
        protocol,
        model_id: cfg.endpoint.model_id.clone(),
        temperature: cfg.temperature,
        seed: cfg.seed,
        threshold: cfg.threshold,
        prompt_digest: crate::prompts::prompt_digest(&prompt),
        settings: RunSettings {
            base_url: cfg.endpoint.base_url.clone(),
            max_output_tokens: cfg.max_output_tokens,
            sampling_seed: cfg.sampling_seed,
            diagnostic_images: cfg.diagnostic_images.as_str().into(),
            dispatch_mode: client.mode().into(),
            session: client.session_path().map(|p| p.display().to_string()),
            max_concurrent: cfg.endpoint.max_concurrent,
            created_at: Utc::now(),
        },
        records,
    };
    store.save_run(&run)?;
    Ok(run)
}

/// Metrics of one run against the consensus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: String,
    pub protocol: Protocol,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub evaluated: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsOutput {
    pub runs: Vec<RunMetrics>,
    /// Present for exactly two runs; computed over samples both predicted.
    pub comparison: Option<ComparisonTable>,
    pub notes: Vec<String>,
}

impl MetricsOutput {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.runs {
            out.push_str(&format!(
                "{} ({}): {} evaluated, {} excluded\n{}\n",
                r.run_id, r.protocol, r.evaluated, r.excluded, r.confusion
            ));
            let v = r.metrics.values();
            out.push_str(&format!(
                "precision {}  recall {}  f1 {}  cohen_kappa {}\n\n",
                v[0], v[1], v[2], v[3]
            ));
        }
        if let Some(table) = &self.comparison {
            out.push_str(&table.render_text());
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn run_metrics(run: &EvalRun, truth: &GroundTruth) -> Result<RunMetrics, HarnessError> {
    let (t, p): (Vec<_>, Vec<_>) = run
        .records
        .iter()
        .filter_map(|r| Some((truth.get(&r.sample_id)?.label, r.predicted_label()?)))
        .unzip();
    let cm = confusion(&t, &p)?;
    Ok(RunMetrics {
        run_id: run.run_id.clone(),
        protocol: run.protocol,
        confusion: cm,
        metrics: classification_metrics(&cm)?,
        evaluated: t.len(),
        excluded: run.records.len() - t.len(),
    })
}

pub fn cmd_metrics(cfg: &HarnessConfig, run_ids: &[String]) -> Result<MetricsOutput, HarnessError> {
    if run_ids.is_empty() {
        return Err(HarnessError::Config("name at least one run id".into()));
    }
    let store = open_store(cfg)?;
    let truth = ground_truth(cfg, &store)?;
    let runs = run_ids.iter().map(|id| store.load_run(id)).collect::<Result<Vec<_>, _>>()?;
    let metrics = runs.iter().map(|r| run_metrics(r, &truth)).collect::<Result<Vec<_>, _>>()?;
    let (comparison, notes) = match runs.as_slice() {
        [a, b] => {
            let c = build_comparison(a, b, &truth)?;
            (Some(c.table), c.reference_notes)
        }
        _ => (None, Vec::new()),
    };
    Ok(MetricsOutput { runs: metrics, comparison, notes })
}

/// Metrics at every score threshold 1..=4 for one run.
pub fn cmd_sweep(cfg: &HarnessConfig, run_id: &str) -> Result<Vec<SweepRow>, HarnessError> {
    let store = open_store(cfg)?;
    let truth = ground_truth(cfg, &store)?;
    let run = store.load_run(run_id)?;
    let (scores, labels): (Vec<u8>, Vec<_>) = run
        .records
        .iter()
        .filter_map(|r| Some((r.assessment()?.complexity_score(), truth.get(&r.sample_id)?.label)))
        .unzip();
    Ok(threshold_sweep(&scores, &labels, 1..=4)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeOutput {
    pub section: TreeSection,
    pub tree: DecisionTree,
    pub dir: PathBuf,
}

/// Trains a tree on a diagnostic run and writes `tree.json`, `rules.txt`,
/// `importances.csv` and `cv.json` under `runs/<id>/tree/`.
pub fn cmd_tree(cfg: &HarnessConfig, run_id: &str, target: Option<TreeTarget>) -> Result<TreeOutput, HarnessError> {
    let store = open_store(cfg)?;
    let truth = ground_truth(cfg, &store)?;
    let run = store.load_run(run_id)?;
    if run.protocol != Protocol::Diagnostic {
        return Err(HarnessError::Prerequisite(format!("run `{run_id}` is not a diagnostic run")));
    }
    let mut settings = cfg.tree_settings();
    if let Some(t) = target {
        settings.target = t;
    }
    let artifacts = tree_section(&run, &truth, settings)?;
    let dir = store.run_dir(run_id).join("tree");
    write_file(&dir.join("tree.json"), serde_json::to_string_pretty(&artifacts.tree).expect("serializes") + "\n")?;
    write_file(&dir.join("rules.txt"), &artifacts.section.rules_table)?;
    let mut csv = Vec::new();
    artifacts
        .importance
        .write_csv(&mut csv)
        .map_err(|e| HarnessError::Io { path: dir.join("importances.csv"), source: std::io::Error::other(e) })?;
    write_file(&dir.join("importances.csv"), csv)?;
    write_file(&dir.join("cv.json"), serde_json::to_string_pretty(&artifacts.section.cv).expect("serializes") + "\n")?;
    Ok(TreeOutput { section: artifacts.section, tree: artifacts.tree, dir })
}

/// Builds the full report for a run pair and writes it under
/// `reports/<baseline>__<candidate>/`.
pub fn cmd_report(cfg: &HarnessConfig, baseline: &str, candidate: &str) -> Result<(FullReport, PathBuf), HarnessError> {
    let store = open_store(cfg)?;
    let truth = ground_truth(cfg, &store)?;
    let a = store.load_run(baseline)?;
    let b = store.load_run(candidate)?;
    let report = build_report(&a, &b, &truth, store.samples(), cfg.tree_settings())?;
    let dir = store.reports_dir().join(pair_dir_name(baseline, candidate));
    report.write_to(&dir)?;
    Ok((report, dir))
}

/// Serves the annotation API until interrupted.
pub fn cmd_serve(cfg: &HarnessConfig) -> Result<(), HarnessError> {
    let store = open_store(cfg)?;
    let options = crate::service::ServiceOptions::from_config(cfg)?;
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|source| HarnessError::Io { path: PathBuf::from("<runtime>"), source })?;
    runtime.block_on(crate::service::serve(store, options))
}
