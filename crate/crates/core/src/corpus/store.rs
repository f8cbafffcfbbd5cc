use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Cursor, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    Annotation, Category, CorpusError, DispatchRecord, EvalRun, ImageRef, MediaType, Outcome,
    RunRecord, RunSettings, Sample, MAX_SCREENSHOTS,
};
use crate::consensus::{self, ConsensusLabel};
use crate::corpus::Protocol;
use crate::digest::sha256_hex;
use crate::parser::BinaryPrediction;

const SAMPLES_FILE: &str = "samples.jsonl";
const ANNOTATIONS_FILE: &str = "annotations.jsonl";
const RESPONSES_FILE: &str = "responses.jsonl";
const PREDICTIONS_FILE: &str = "predictions.jsonl";
const CONFIG_FILE: &str = "config.json";
const REVIEWS_FILE: &str = "reviews.jsonl";

/// One entry of an ingest manifest. Screenshot paths are resolved relative
/// to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub query: String,
    pub category: Category,
    pub screenshots: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
}

/// Outcome of [`Store::ingest_manifest`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    /// Samples named by the manifest.
    pub total: usize,
    pub by_category: BTreeMap<Category, usize>,
    pub added: usize,
    /// Samples already present with identical content.
    pub unchanged: usize,
    /// Samples in the corpus after ingest.
    pub corpus_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewVerdict {
    ConfirmedGap,
    AnnotationSuspect,
}

/// Reviewer note attached to a failure case of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub sample_id: String,
    pub reviewer_id: String,
    pub verdict: ReviewVerdict,
    #[serde(default)]
    pub note: Option<String>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct RunConfigFile {
    run_id: String,
    protocol: Protocol,
    model_id: String,
    temperature: f64,
    seed: u64,
    threshold: u8,
    prompt_digest: String,
    settings: RunSettings,
    sample_count: usize,
    artifacts: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ResponseLine {
    sample_id: String,
    request_digest: Option<String>,
    temperature: f64,
    dispatch: Option<DispatchRecord>,
}

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    sample_id: String,
    #[serde(flatten)]
    outcome: Outcome,
    repair_applied: bool,
    prediction: Option<BinaryPrediction>,
}

/// Directory-backed corpus. Single writer: mutating methods take `&mut self`.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    samples: Vec<Sample>,
    sample_index: HashMap<String, usize>,
    annotations: Vec<Annotation>,
    consensus_cache: Mutex<HashMap<String, ConsensusLabel>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("run types serialize"));
        out.push('\n');
    }
    out
}

fn append_jsonl<T: Serialize>(path: &Path, item: &T) -> Result<(), CorpusError> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let line = serde_json::to_string(item).expect("corpus types serialize");
    writeln!(file, "{line}").map_err(io_err(path))
}

/// Writes via a sibling temp file and rename so readers never see a
/// half-written file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CorpusError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

struct DigestedImage {
    bytes: Vec<u8>,
    image: ImageRef,
}

fn digest_image(sample: &str, path: &Path) -> Result<DigestedImage, CorpusError> {
    if !path.is_file() {
        return Err(CorpusError::MissingImage { sample: sample.into(), path: path.into() });
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    let unreadable = |reason: String| CorpusError::UnreadableImage {
        sample: sample.into(),
        path: path.into(),
        reason,
    };
    let reader = image::ImageReader::new(Cursor::new(&bytes))
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?;
    let media_type = match reader.format() {
        Some(image::ImageFormat::Png) => MediaType::Png,
        Some(image::ImageFormat::Jpeg) => MediaType::Jpeg,
        Some(other) => return Err(unreadable(format!("unsupported format {other:?}"))),
        None => return Err(unreadable("not a recognised image".into())),
    };
    let (width, height) = reader.into_dimensions().map_err(|e| unreadable(e.to_string()))?;
    if width == 0 || height == 0 {
        return Err(unreadable("zero-sized image".into()));
    }
    let sha256 = sha256_hex(&bytes);
    let image = ImageRef {
        path: format!("images/{sha256}.{}", media_type.extension()),
        media_type,
        sha256,
        width,
        height,
    };
    Ok(DigestedImage { bytes, image })
}

impl Store {
    /// Opens (creating if needed) the corpus rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let root = root.as_ref().to_path_buf();
        for dir in [root.clone(), root.join("images"), root.join("runs")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let samples: Vec<Sample> = read_jsonl(&root.join(SAMPLES_FILE))?;
        let sample_index = samples.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let annotations = read_jsonl(&root.join(ANNOTATIONS_FILE))?;
        Ok(Self {
            root,
            samples,
            sample_index,
            annotations,
            consensus_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.sample_index.get(id).map(|&i| &self.samples[i])
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn annotations_for(&self, sample_id: &str) -> Vec<Annotation> {
        self.annotations.iter().filter(|a| a.sample_id == sample_id).cloned().collect()
    }

    /// Absolute path of a stored screenshot.
    pub fn image_path(&self, image: &ImageRef) -> PathBuf {
        self.root.join(&image.path)
    }

    /// Reads a stored screenshot and checks it against its digest.
    pub fn read_image(&self, image: &ImageRef) -> Result<Vec<u8>, CorpusError> {
        let path = self.image_path(image);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != image.sha256 {
            return Err(CorpusError::ImageDigestMismatch { path });
        }
        Ok(bytes)
    }

    /// Validates every manifest entry, then persists the new samples.
    ///
    /// Nothing is written if any entry fails validation. Re-ingesting a
    /// sample with identical content is a no-op; a differing sample under an
    /// existing id is a duplicate.
    pub fn ingest_manifest(&mut self, manifest: &Path) -> Result<CorpusSummary, CorpusError> {
        let text = fs::read_to_string(manifest).map_err(io_err(manifest))?;
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(&text).map_err(|source| CorpusError::Json {
                path: manifest.to_path_buf(),
                line: 0,
                source,
            })?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        self.ingest_entries(&entries, base)
    }

    pub fn ingest_entries(
        &mut self,
        entries: &[ManifestEntry],
        base: &Path,
    ) -> Result<CorpusSummary, CorpusError> {
        let now = Utc::now();
        let mut seen = HashSet::new();
        let mut staged: Vec<(Sample, Vec<DigestedImage>)> = Vec::new();
        let mut by_category: BTreeMap<Category, usize> =
            Category::ALL.into_iter().map(|c| (c, 0)).collect();
        let mut unchanged = 0;

        for entry in entries {
            if !seen.insert(entry.id.as_str()) {
                return Err(CorpusError::DuplicateSample(entry.id.clone()));
            }
            if entry.screenshots.len() > MAX_SCREENSHOTS {
                return Err(CorpusError::TooManyScreenshots {
                    sample: entry.id.clone(),
                    count: entry.screenshots.len(),
                });
            }
            if entry.screenshots.is_empty() {
                return Err(CorpusError::NoScreenshots(entry.id.clone()));
            }
            let images = entry
                .screenshots
                .iter()
                .map(|p| digest_image(&entry.id, &base.join(p)))
                .collect::<Result<Vec<_>, _>>()?;
            *by_category.entry(entry.category).or_default() += 1;

            let sample = Sample {
                id: entry.id.clone(),
                query: entry.query.clone(),
                category: entry.category,
                screenshots: images.iter().map(|d| d.image.clone()).collect(),
                created_at: entry.created_at.unwrap_or(now),
            };
            match self.sample(&entry.id) {
                Some(existing)
                    if existing.query == sample.query
                        && existing.category == sample.category
                        && existing.screenshots == sample.screenshots =>
                {
                    unchanged += 1;
                }
                Some(_) => return Err(CorpusError::DuplicateSample(entry.id.clone())),
                None => staged.push((sample, images)),
            }
        }

        let added = staged.len();
        for (sample, images) in staged {
            for d in images {
                let dest = self.root.join(&d.image.path);
                if !dest.exists() {
                    fs::write(&dest, &d.bytes).map_err(io_err(&dest))?;
                }
            }
            append_jsonl(&self.root.join(SAMPLES_FILE), &sample)?;
            self.sample_index.insert(sample.id.clone(), self.samples.len());
            self.samples.push(sample);
        }

        Ok(CorpusSummary {
            total: entries.len(),
            by_category,
            added,
            unchanged,
            corpus_total: self.samples.len(),
        })
    }

    /// Persists one annotation. An existing annotation by the same annotator
    /// is replaced only when `overwrite` is set.
    pub fn store_annotation(
        &mut self,
        annotation: Annotation,
        overwrite: bool,
    ) -> Result<Annotation, CorpusError> {
        if self.sample(&annotation.sample_id).is_none() {
            return Err(CorpusError::UnknownSample(annotation.sample_id.clone()));
        }
        annotation.validate()?;
        let existing = self.annotations.iter().position(|a| {
            a.sample_id == annotation.sample_id && a.annotator_id == annotation.annotator_id
        });
        let path = self.root.join(ANNOTATIONS_FILE);
        match existing {
            Some(_) if !overwrite => {
                return Err(CorpusError::DuplicateAnnotation {
                    sample: annotation.sample_id.clone(),
                    annotator: annotation.annotator_id.clone(),
                })
            }
            Some(i) => {
                self.annotations[i] = annotation.clone();
                write_atomic(&path, to_jsonl(&self.annotations).as_bytes())?;
            }
            None => {
                append_jsonl(&path, &annotation)?;
                self.annotations.push(annotation.clone());
            }
        }
        self.consensus_cache.lock().expect("cache lock").remove(&annotation.sample_id);
        Ok(annotation)
    }

    /// Imports an annotations JSONL file; every line is validated before any
    /// is stored.
    pub fn import_annotations(
        &mut self,
        path: &Path,
        overwrite: bool,
    ) -> Result<usize, CorpusError> {
        let incoming: Vec<Annotation> = read_jsonl(path)?;
        for a in &incoming {
            if self.sample(&a.sample_id).is_none() {
                return Err(CorpusError::UnknownSample(a.sample_id.clone()));
            }
            a.validate()?;
        }
        let n = incoming.len();
        for a in incoming {
            self.store_annotation(a, overwrite)?;
        }
        Ok(n)
    }

    /// Majority-vote consensus for one sample, or `None` if it has no
    /// annotations yet.
    pub fn consensus(&self, sample_id: &str) -> Result<Option<ConsensusLabel>, CorpusError> {
        if self.sample(sample_id).is_none() {
            return Err(CorpusError::UnknownSample(sample_id.to_string()));
        }
        let mut cache = self.consensus_cache.lock().expect("cache lock");
        if let Some(c) = cache.get(sample_id) {
            return Ok(Some(c.clone()));
        }
        let anns = self.annotations_for(sample_id);
        if anns.is_empty() {
            return Ok(None);
        }
        let label = consensus::aggregate(&anns).expect("non-empty, single sample");
        cache.insert(sample_id.to_string(), label.clone());
        Ok(Some(label))
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.runs_dir().join(run_id)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn run_ids(&self) -> Result<Vec<String>, CorpusError> {
        let dir = self.runs_dir();
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            if entry.path().join(CONFIG_FILE).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Next free id of the form `<protocol>-NNNN`.
    pub fn next_run_id(&self, protocol: Protocol) -> Result<String, CorpusError> {
        let prefix = format!("{}-", protocol.as_str());
        let dir = self.runs_dir();
        let mut max = 0u32;
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(n) = name.strip_prefix(&prefix).and_then(|s| s.parse::<u32>().ok()) {
                max = max.max(n);
            }
        }
        Ok(format!("{prefix}{:04}", max + 1))
    }

    /// Writes a run directory. Runs are immutable: an existing id is refused.
    pub fn save_run(&self, run: &EvalRun) -> Result<String, CorpusError> {
        run.validate()?;
        let dir = self.run_dir(&run.run_id);
        if dir.exists() {
            return Err(CorpusError::RunExists(run.run_id.clone()));
        }
        let responses = to_jsonl(run.records.iter().map(|r| ResponseLine {
            sample_id: r.sample_id.clone(),
            request_digest: r.request_digest.clone(),
            temperature: r.temperature,
            dispatch: r.dispatch.clone(),
        }));
        let predictions = to_jsonl(run.records.iter().map(|r| PredictionLine {
            sample_id: r.sample_id.clone(),
            outcome: r.outcome.clone(),
            repair_applied: r.repair_applied,
            prediction: r.prediction.clone(),
        }));
        let config = RunConfigFile {
            run_id: run.run_id.clone(),
            protocol: run.protocol,
            model_id: run.model_id.clone(),
            temperature: run.temperature,
            seed: run.seed,
            threshold: run.threshold,
            prompt_digest: run.prompt_digest.clone(),
            settings: run.settings.clone(),
            sample_count: run.records.len(),
            artifacts: BTreeMap::from([
                (RESPONSES_FILE.to_string(), sha256_hex(&responses)),
                (PREDICTIONS_FILE.to_string(), sha256_hex(&predictions)),
            ]),
        };
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let write = |name: &str, body: &[u8]| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(io_err(&p))
        };
        write(RESPONSES_FILE, responses.as_bytes())?;
        write(PREDICTIONS_FILE, predictions.as_bytes())?;
        let mut config_json = serde_json::to_string_pretty(&config).expect("config serializes");
        config_json.push('\n');
        write(CONFIG_FILE, config_json.as_bytes())?;
        Ok(run.run_id.clone())
    }

    pub fn load_run(&self, run_id: &str) -> Result<EvalRun, CorpusError> {
        let dir = self.run_dir(run_id);
        let config_path = dir.join(CONFIG_FILE);
        if !config_path.is_file() {
            return Err(CorpusError::UnknownRun(run_id.to_string()));
        }
        let text = fs::read_to_string(&config_path).map_err(io_err(&config_path))?;
        let config: RunConfigFile =
            serde_json::from_str(&text).map_err(|source| CorpusError::Json {
                path: config_path.clone(),
                line: 0,
                source,
            })?;
        for (file, expected) in &config.artifacts {
            let p = dir.join(file);
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            let actual = sha256_hex(&bytes);
            if &actual != expected {
                return Err(CorpusError::CorruptRun {
                    run: run_id.to_string(),
                    file: file.clone(),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        let responses: Vec<ResponseLine> = read_jsonl(&dir.join(RESPONSES_FILE))?;
        let predictions: Vec<PredictionLine> = read_jsonl(&dir.join(PREDICTIONS_FILE))?;
        if responses.len() != predictions.len() || responses.len() != config.sample_count {
            return Err(CorpusError::InvalidRun(format!(
                "run `{run_id}` has {} responses and {} predictions for {} samples",
                responses.len(),
                predictions.len(),
                config.sample_count
            )));
        }
        let records = responses
            .into_iter()
            .zip(predictions)
            .map(|(resp, pred)| {
                if resp.sample_id != pred.sample_id {
                    return Err(CorpusError::InvalidRun(format!(
                        "run `{run_id}`: responses and predictions disagree on order at `{}`",
                        resp.sample_id
                    )));
                }
                Ok(RunRecord {
                    sample_id: resp.sample_id,
                    request_digest: resp.request_digest,
                    temperature: resp.temperature,
                    dispatch: resp.dispatch,
                    outcome: pred.outcome,
                    repair_applied: pred.repair_applied,
                    prediction: pred.prediction,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let run = EvalRun {
            run_id: config.run_id,
            protocol: config.protocol,
            model_id: config.model_id,
            temperature: config.temperature,
            seed: config.seed,
            threshold: config.threshold,
            prompt_digest: config.prompt_digest,
            settings: config.settings,
            records,
        };
        run.validate()?;
        Ok(run)
    }

    pub fn add_review(&self, run_id: &str, review: &Review) -> Result<(), CorpusError> {
        let run = self.load_run(run_id)?;
        if run.record(&review.sample_id).is_none() {
            return Err(CorpusError::UnknownSample(review.sample_id.clone()));
        }
        append_jsonl(&self.run_dir(run_id).join(REVIEWS_FILE), review)
    }

    pub fn reviews(&self, run_id: &str) -> Result<Vec<Review>, CorpusError> {
        if !self.run_dir(run_id).join(CONFIG_FILE).is_file() {
            return Err(CorpusError::UnknownRun(run_id.to_string()));
        }
        read_jsonl(&self.run_dir(run_id).join(REVIEWS_FILE))
    }
}
