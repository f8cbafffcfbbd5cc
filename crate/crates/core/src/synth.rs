//! Deterministic synthetic data: the bundled 20-sample fixture corpus with
//! its record/replay session, parser corpora, a Table-1-shaped store, and
//! labelled feature datasets for the tree.

use std::collections::BTreeSet;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::client::SessionEntry;
use crate::consensus::Driver;
use crate::corpus::{
    Annotation, Category, CorpusError, DispatchRecord, EvalRun, Label, ManifestEntry, Outcome, Protocol,
    RunRecord, RunSettings, Store,
};
use crate::dtree::FeatureVector;
use crate::metrics::ConfusionMatrix;
use crate::parser::{
    to_binary, Answer, Answers, Assessment, DiagnosticResponse, GestaltAssessment, Principle, DEFAULT_THRESHOLD,
    QUESTION_COUNT,
};
use crate::prompts::{render_bytes, DiagnosticImages, PromptProtocol, SamplingConfig};

/// Fixed clock for everything the generators timestamp.
pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 6, 9, 0, 0).single().expect("valid date")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- images

const SHOT_W: u32 = 360;
const SHOT_H: u32 = 640;

fn fill(img: &mut RgbImage, x: u32, y: u32, w: u32, h: u32, c: [u8; 3]) {
    for yy in y..(y + h).min(img.height()) {
        for xx in x..(x + w).min(img.width()) {
            img.put_pixel(xx, yy, Rgb(c));
        }
    }
}

/// A stylised results page: header, filter rail and a product grid whose
/// density, colour and badge count grow with `complexity` in [0, 1].
pub fn srp_screenshot(seed: u64, complexity: f64, part: usize) -> Vec<u8> {
    let mut r = rng(seed ^ ((part as u64) << 32));
    let mut img = RgbImage::from_pixel(SHOT_W, SHOT_H, Rgb([250, 250, 250]));
    if part == 0 {
        fill(&mut img, 0, 0, SHOT_W, 48, [35, 47, 62]);
        fill(&mut img, 60, 12, 220, 24, [255, 255, 255]);
    }
    let rail = 70 + (complexity * 40.0) as u32;
    fill(&mut img, 0, 56, rail, SHOT_H - 56, [238, 238, 238]);
    for i in 0..(6 + (complexity * 14.0) as u32) {
        fill(&mut img, 8, 64 + i * 22, rail - 16, 8, [170, 170, 170]);
    }
    let cols = 2 + (complexity * 3.0).round() as u32;
    let gap = 12 - (complexity * 8.0) as u32;
    let tile_w = (SHOT_W - rail - gap * (cols + 1)) / cols;
    let tile_h = tile_w + 70;
    let mut y = 60 + gap;
    while y + tile_h < SHOT_H {
        for c in 0..cols {
            let x = rail + gap + c * (tile_w + gap);
            let sat = 80.0 + complexity * 170.0;
            let hue: [u8; 3] = [
                r.random_range(40..=sat as u8),
                r.random_range(40..=sat as u8),
                r.random_range(40..=sat as u8),
            ];
            fill(&mut img, x, y, tile_w, tile_w, hue);
            for line in 0..3 {
                fill(&mut img, x, y + tile_w + 8 + line * 14, tile_w - line * 12, 6, [90, 90, 90]);
            }
            let badges = r.random_range(0..=(complexity * 4.0) as u32);
            for b in 0..badges {
                fill(&mut img, x + 4 + b * 18, y + 4, 14, 10, [214, 40, 40]);
            }
        }
        y += tile_h + gap;
    }
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG");
    out.into_inner()
}

// ------------------------------------------------------- fixture corpus

/// Planned behaviour of one fixture sample.
#[derive(Debug, Clone, Copy)]
struct Plan {
    complex_votes: usize,
    diag: Label,
    standard: Label,
    diag_style: ReplyStyle,
    standard_style: ReplyStyle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ReplyStyle {
    Plain,
    Fenced,
    ProseAndTrailingComma,
    MissingQ13,
    Markdown,
}

const QUERIES: [&str; 20] = [
    "wireless earbuds",
    "laundry detergent pods",
    "running shoes men",
    "usb c charger",
    "coffee pods variety",
    "kids rain jacket",
    "standing desk",
    "paper towels bulk",
    "yoga mat thick",
    "phone case",
    "protein powder",
    "winter gloves",
    "air fryer",
    "dish soap",
    "hiking socks",
    "led desk lamp",
    "vitamin d3",
    "denim jacket women",
    "bluetooth speaker",
    "trash bags 13 gallon",
];

fn plans() -> [Plan; 20] {
    use Label::{Complex as C, NotComplex as N};
    use ReplyStyle::*;
    let p = |complex_votes, diag, standard| Plan {
        complex_votes,
        diag,
        standard,
        diag_style: Plain,
        standard_style: Plain,
    };
    let mut plans = [
        p(3, C, N),
        p(3, N, N),
        p(3, C, C),
        p(3, C, N),
        p(3, C, N),
        p(2, C, N),
        p(2, N, N),
        p(2, C, C),
        p(0, N, N),
        p(1, C, N),
        p(0, N, C),
        p(0, N, N),
        p(0, N, N),
        p(0, N, N),
        p(0, N, N),
        p(0, N, N),
        p(1, N, N),
        p(1, C, N),
        p(0, N, N),
        p(0, N, N),
    ];
    plans[3].diag_style = Fenced;
    plans[11].diag_style = ProseAndTrailingComma;
    plans[19].diag_style = MissingQ13;
    plans[4].standard_style = Markdown;
    plans[14].standard_style = Fenced;
    plans
}

pub const FIXTURE_SAMPLES: usize = 20;
pub const FIXTURE_ANNOTATORS: [&str; 3] = ["ann-a", "ann-b", "ann-c"];

fn fixture_id(i: usize) -> String {
    format!("srp-{:03}", i + 1)
}

fn screenshot_count(i: usize) -> usize {
    i % 3 + 1
}

fn category(i: usize) -> Category {
    Category::ALL[i % 4]
}

fn fixture_annotations(i: usize, plan: &Plan, r: &mut ChaCha8Rng) -> Vec<Annotation> {
    FIXTURE_ANNOTATORS
        .iter()
        .enumerate()
        .map(|(k, annotator)| {
            let label = if k < plan.complex_votes { Label::Complex } else { Label::NotComplex };
            let mut drivers = BTreeSet::new();
            if label == Label::Complex {
                drivers.insert(if r.random_bool(0.7) { Driver::TooManyBadges } else { Driver::ProductsTooSimilar });
                for _ in 0..r.random_range(0..=2) {
                    drivers.insert(Driver::CATALOG[r.random_range(0..Driver::CATALOG.len())]);
                }
            }
            Annotation {
                sample_id: fixture_id(i),
                annotator_id: annotator.to_string(),
                label,
                drivers,
                submitted_at: epoch() + Duration::minutes((i * 3 + k) as i64),
            }
        })
        .collect()
}

fn random_answer(r: &mut ChaCha8Rng) -> Answer {
    match r.random_range(0..20) {
        0..=8 => Answer::Yes,
        9..=16 => Answer::No,
        _ => Answer::NotSure,
    }
}

/// Answers in which "No" to Q7 and Q2 go with a Complex verdict.
fn diagnostic_answers(predicted: Label, r: &mut ChaCha8Rng) -> Answers {
    let mut a = [Answer::No; QUESTION_COUNT];
    for slot in a.iter_mut() {
        *slot = random_answer(r);
    }
    match predicted {
        Label::Complex => {
            a[6] = if r.random_bool(0.8) { Answer::No } else { Answer::NotSure };
            a[1] = Answer::No;
        }
        Label::NotComplex => {
            if r.random_bool(0.75) {
                a[6] = Answer::Yes;
            } else {
                a[6] = Answer::No;
                a[1] = Answer::Yes;
            }
        }
    }
    Answers(a)
}

fn score_for(label: Label, r: &mut ChaCha8Rng) -> u8 {
    match label {
        Label::Complex => r.random_range(1..=DEFAULT_THRESHOLD),
        Label::NotComplex => r.random_range(DEFAULT_THRESHOLD + 1..=5),
    }
}

fn diagnostic_reply(plan: &Plan, r: &mut ChaCha8Rng) -> String {
    let response = DiagnosticResponse {
        answers: diagnostic_answers(plan.diag, r),
        complexity_score: score_for(plan.diag, r),
        explanation: match plan.diag {
            Label::Complex => "Dense grid with many badges and similar-looking product tiles; the filter rail competes for attention.".into(),
            Label::NotComplex => "Clear hierarchy, consistent tile spacing and few promotional badges.".into(),
        },
    };
    let json = response.to_json();
    match plan.diag_style {
        ReplyStyle::Fenced => format!("```json\n{json}\n```"),
        ReplyStyle::ProseAndTrailingComma => {
            let body = json.trim_end().strip_suffix('}').expect("object").trim_end().to_string();
            format!("Here is my assessment of the page:\n{body},\n}}\n")
        }
        ReplyStyle::MissingQ13 => {
            let mut v: serde_json::Value = serde_json::from_str(&json).expect("valid");
            v["diagnostics"].as_object_mut().expect("object").remove("Q13");
            serde_json::to_string_pretty(&v).expect("serializes")
        }
        ReplyStyle::Plain | ReplyStyle::Markdown => json,
    }
}

fn standard_reply(plan: &Plan, r: &mut ChaCha8Rng) -> String {
    let scores: [u8; 6] = std::array::from_fn(|i| r.random_range(1..=Principle::ALL[i].max_score()));
    let final_score = score_for(plan.standard, r);
    let comment = match plan.standard {
        Label::Complex => "The layout feels busy overall.",
        Label::NotComplex => "The layout follows a familiar grid and reads easily.",
    };
    match plan.standard_style {
        ReplyStyle::Markdown => {
            let mut text = String::from("## Gestalt evaluation\n\n");
            for (p, s) in Principle::ALL.iter().zip(scores) {
                text.push_str(&format!("**{}**\n- Score: {s} points\n\n", p.heading()));
            }
            text.push_str(&format!("{comment}\n\n**Result: {final_score}**\n"));
            text
        }
        ReplyStyle::Fenced => {
            let g = GestaltAssessment::render(scores, final_score, comment);
            format!("```\n{}```\n", g.rationale_text)
        }
        _ => GestaltAssessment::render(scores, final_score, comment).rationale_text,
    }
}

/// Paths written by [`write_fixture_corpus`], relative to its directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureLayout {
    pub manifest: PathBuf,
    pub annotations: PathBuf,
    pub session: PathBuf,
    pub files: Vec<PathBuf>,
}

pub const FIXTURE_MANIFEST: &str = "manifest.json";
pub const FIXTURE_ANNOTATIONS: &str = "annotations.jsonl";
pub const FIXTURE_SESSION: &str = "session.jsonl";

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).expect("serializes") + "\n").collect()
}

/// Writes the 20-sample fixture corpus into `dir`: screenshots, manifest,
/// three annotators per sample (8 Complex / 12 NotComplex by majority) and
/// a session answering both protocols under default sampling settings.
///
/// The output is a pure function of the code; rerunning it reproduces the
/// same bytes.
pub fn write_fixture_corpus(dir: &Path) -> std::io::Result<FixtureLayout> {
    std::fs::create_dir_all(dir.join("screenshots"))?;
    let mut files = Vec::new();
    let mut manifest = Vec::new();
    let mut annotations = Vec::new();
    let mut session = Vec::new();
    let sampling = SamplingConfig::default();
    let standard = PromptProtocol::builtin(Protocol::Standard);
    let diagnostic = PromptProtocol::builtin(Protocol::Diagnostic);

    for (i, plan) in plans().iter().enumerate() {
        let mut r = rng(1_000 + i as u64);
        let complexity = plan.complex_votes as f64 / 3.0 * 0.8 + r.random_range(0.0..0.2);
        let mut shots = Vec::new();
        let mut bytes = Vec::new();
        for part in 0..screenshot_count(i) {
            let png = srp_screenshot(i as u64, complexity, part);
            let rel = PathBuf::from(format!("screenshots/{}-{}.png", fixture_id(i), part + 1));
            std::fs::write(dir.join(&rel), &png)?;
            files.push(rel.clone());
            shots.push(rel);
            bytes.push(png);
        }
        manifest.push(ManifestEntry {
            id: fixture_id(i),
            query: QUERIES[i].to_string(),
            category: category(i),
            screenshots: shots,
            created_at: Some(epoch()),
        });
        annotations.extend(fixture_annotations(i, plan, &mut r));

        for (protocol, reply) in [
            (&standard, standard_reply(plan, &mut r)),
            (&diagnostic, diagnostic_reply(plan, &mut r)),
        ] {
            let req = render_bytes(&fixture_id(i), bytes.clone(), protocol, &sampling, DiagnosticImages::First)
                .map_err(std::io::Error::other)?;
            session.push(SessionEntry { request_digest: req.digest(), raw_text: reply, recorded_at: epoch() });
        }
    }

    let layout = FixtureLayout {
        manifest: FIXTURE_MANIFEST.into(),
        annotations: FIXTURE_ANNOTATIONS.into(),
        session: FIXTURE_SESSION.into(),
        files,
    };
    std::fs::write(
        dir.join(FIXTURE_MANIFEST),
        serde_json::to_string_pretty(&manifest).expect("serializes") + "\n",
    )?;
    std::fs::write(dir.join(FIXTURE_ANNOTATIONS), jsonl(&annotations))?;
    std::fs::write(dir.join(FIXTURE_SESSION), jsonl(&session))?;
    Ok(layout)
}

/// Expected consensus label of each fixture sample, in id order.
pub fn fixture_truth() -> Vec<(String, Label)> {
    plans()
        .iter()
        .enumerate()
        .map(|(i, p)| (fixture_id(i), if p.complex_votes >= 2 { Label::Complex } else { Label::NotComplex }))
        .collect()
}

// -------------------------------------------------------- parser corpora

/// One golden reply and the value it must parse to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub raw: String,
    pub expected: DiagnosticResponse,
}

/// One corrupted reply and the error class it must produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationCase {
    pub name: String,
    pub raw: String,
    pub expected_error: String,
}

fn base_responses(n: usize) -> Vec<DiagnosticResponse> {
    let mut r = rng(77);
    (0..n)
        .map(|i| {
            let mut a = [Answer::No; QUESTION_COUNT];
            for slot in a.iter_mut() {
                *slot = random_answer(&mut r);
            }
            DiagnosticResponse {
                answers: Answers(a),
                complexity_score: r.random_range(1..=5),
                explanation: format!(
                    "Case {i}: {} with \"quoted\" terms, braces {{like this}} and a trailing note.",
                    ["badges crowd the tiles", "the grid is calm", "filters dominate the left rail"][i % 3]
                ),
            }
        })
        .collect()
}

fn with_trailing_commas(json: &str) -> String {
    json.replace("\"\n", "\",\n")
}

/// Strict, fenced, trailing-comma and combined variants of 25 replies.
pub fn golden_corpus() -> Vec<GoldenCase> {
    let mut out = Vec::new();
    for (i, resp) in base_responses(25).into_iter().enumerate() {
        let strict = resp.to_json();
        let compact = serde_json::to_string(&serde_json::from_str::<serde_json::Value>(&strict).expect("valid"))
            .expect("serializes");
        let trailing = with_trailing_commas(&strict);
        let variants = [
            ("strict", strict.clone()),
            ("compact", compact),
            ("fenced", format!("```json\n{strict}\n```")),
            ("trailing_comma", trailing.clone()),
            ("fenced_trailing_comma", format!("Sure! Here is the JSON.\n```json\n{trailing}\n```\nLet me know.")),
        ];
        for (kind, raw) in variants {
            out.push(GoldenCase { name: format!("{i:02}-{kind}"), raw, expected: resp.clone() });
        }
    }
    out
}

/// Missing keys, bad answers and out-of-range or mistyped scores.
pub fn mutation_corpus() -> Vec<MutationCase> {
    let mut out = Vec::new();
    let mut push = |name: String, v: &serde_json::Value, expected: &str| {
        out.push(MutationCase {
            name,
            raw: serde_json::to_string_pretty(v).expect("serializes"),
            expected_error: expected.to_string(),
        });
    };
    for (i, resp) in base_responses(10).into_iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(&resp.to_json()).expect("valid");
        let q = format!("Q{}", i * 2 + 1);

        let mut m = v.clone();
        m["diagnostics"].as_object_mut().expect("object").remove(&q);
        push(format!("{i:02}-missing-{q}"), &m, "missing_question");

        for field in ["complexity_score", "explanation", "diagnostics"] {
            let mut m = v.clone();
            m.as_object_mut().expect("object").remove(field);
            push(format!("{i:02}-missing-{field}"), &m, "missing_field");
        }
        for bad in [0, 6, -1, 10] {
            let mut m = v.clone();
            m["complexity_score"] = bad.into();
            push(format!("{i:02}-score-{bad}"), &m, "score_out_of_range");
        }
        for (label, bad) in [("string", serde_json::json!("3")), ("float", serde_json::json!(2.5))] {
            let mut m = v.clone();
            m["complexity_score"] = bad;
            push(format!("{i:02}-score-{label}"), &m, "invalid_field");
        }
        let mut m = v.clone();
        m["diagnostics"][&q] = "Maybe".into();
        push(format!("{i:02}-answer-maybe"), &m, "invalid_answer");

        let mut m = v.clone();
        m["diagnostics"]["Q26"] = "Yes".into();
        push(format!("{i:02}-extra-Q26"), &m, "unexpected_key");
    }
    let mut raw = |name: &str, text: &str, expected: &str| {
        out.push(MutationCase { name: name.into(), raw: text.into(), expected_error: expected.into() });
    };
    raw("empty", "", "no_parseable_block");
    raw("prose-only", "I cannot evaluate this page.", "no_parseable_block");
    raw("array", "[1, 2, 3]", "no_parseable_block");
    raw("truncated", "{\"diagnostics\": {\"Q1\": \"Yes\"", "no_parseable_block");
    out
}

// --------------------------------------------------- table-1 style store

/// Per-sample labels reproducing two confusion matrices over one truth
/// vector. Both matrices must share their row marginals.
pub fn paired_labels(a: ConfusionMatrix, b: ConfusionMatrix) -> Vec<(Label, Label, Label)> {
    assert_eq!(a.actual_complex(), b.actual_complex(), "row marginals differ");
    assert_eq!(a.actual_not_complex(), b.actual_not_complex(), "row marginals differ");
    let mut out = Vec::new();
    for i in 0..a.actual_complex() {
        out.push((Label::Complex, label_if(i < a.true_pos), label_if(i < b.true_pos)));
    }
    for i in 0..a.actual_not_complex() {
        out.push((Label::NotComplex, label_if(i < a.false_pos), label_if(i < b.false_pos)));
    }
    out
}

fn label_if(complex: bool) -> Label {
    if complex {
        Label::Complex
    } else {
        Label::NotComplex
    }
}

fn run_settings() -> RunSettings {
    RunSettings {
        base_url: "synthetic".into(),
        max_output_tokens: crate::prompts::DEFAULT_MAX_OUTPUT_TOKENS,
        sampling_seed: None,
        diagnostic_images: DiagnosticImages::First.as_str().into(),
        dispatch_mode: "synthetic".into(),
        session: None,
        max_concurrent: 1,
        created_at: epoch(),
    }
}

fn synthetic_record(sample_id: String, protocol: Protocol, predicted: Label, r: &mut ChaCha8Rng) -> RunRecord {
    let plan = Plan {
        complex_votes: 0,
        diag: predicted,
        standard: predicted,
        diag_style: ReplyStyle::Plain,
        standard_style: ReplyStyle::Plain,
    };
    let (raw, assessment) = match protocol {
        Protocol::Standard => {
            let raw = standard_reply(&plan, r);
            let g = crate::parser::parse_gestalt(&raw).expect("generated reply parses");
            (raw, Assessment::Gestalt(g))
        }
        Protocol::Diagnostic => {
            let raw = diagnostic_reply(&plan, r);
            let d = crate::parser::parse_diagnostic(&raw).expect("generated reply parses").value;
            (raw, Assessment::Diagnostic(d))
        }
    };
    let prediction = to_binary(assessment.complexity_score(), DEFAULT_THRESHOLD).expect("valid score");
    RunRecord {
        sample_id,
        request_digest: None,
        temperature: crate::prompts::DEFAULT_TEMPERATURE,
        dispatch: Some(DispatchRecord::Response { raw_text: raw, latency_ms: 0, attempt_count: 0 }),
        outcome: Outcome::Parsed(assessment),
        repair_applied: false,
        prediction: Some(prediction),
    }
}

/// Run ids created by [`write_table1_store`].
pub const TABLE1_RUNS: [&str; 2] = ["standard-0001", "diagnostic-0001"];

/// Fills an empty store at `root` with 200 single-screenshot samples, one
/// annotation each, and a standard / diagnostic run pair whose confusion
/// matrices are the published ones.
pub fn write_table1_store(root: &Path) -> Result<Store, CorpusError> {
    use crate::metrics::baseline::{DIAGNOSTIC_CONFUSION, STANDARD_CONFUSION};
    let mut store = Store::open(root)?;
    let staging = root.join("staging");
    std::fs::create_dir_all(&staging).map_err(|source| CorpusError::Io { path: staging.clone(), source })?;
    let labels = paired_labels(STANDARD_CONFUSION, DIAGNOSTIC_CONFUSION);
    let mut entries = Vec::new();
    for (i, (truth, _, _)) in labels.iter().enumerate() {
        // a handful of distinct images keeps the store small
        let variant = i % 8;
        let name = format!("page-{variant}.png");
        let path = staging.join(&name);
        if !path.exists() {
            let png = srp_screenshot(900 + variant as u64, if truth.is_complex() { 0.8 } else { 0.2 }, 0);
            std::fs::write(&path, png).map_err(|source| CorpusError::Io { path: path.clone(), source })?;
        }
        entries.push(ManifestEntry {
            id: format!("t1-{:03}", i + 1),
            query: format!("query {}", i + 1),
            category: category(i),
            screenshots: vec![PathBuf::from(name)],
            created_at: Some(epoch()),
        });
    }
    store.ingest_entries(&entries, &staging)?;
    for (i, (truth, _, _)) in labels.iter().enumerate() {
        let drivers = if truth.is_complex() { BTreeSet::from([Driver::CATALOG[i % 7]]) } else { BTreeSet::new() };
        store.store_annotation(
            Annotation {
                sample_id: format!("t1-{:03}", i + 1),
                annotator_id: "ann-a".into(),
                label: *truth,
                drivers,
                submitted_at: epoch(),
            },
            false,
        )?;
    }
    let mut r = rng(2024);
    for (protocol, run_id) in [(Protocol::Standard, TABLE1_RUNS[0]), (Protocol::Diagnostic, TABLE1_RUNS[1])] {
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, (_, s, d))| {
                let predicted = if protocol == Protocol::Standard { *s } else { *d };
                synthetic_record(format!("t1-{:03}", i + 1), protocol, predicted, &mut r)
            })
            .collect();
        store.save_run(&EvalRun {
            run_id: run_id.into(),
            protocol,
            model_id: "synthetic".into(),
            temperature: crate::prompts::DEFAULT_TEMPERATURE,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            prompt_digest: crate::prompts::pinned_digest(protocol),
            settings: run_settings(),
            records,
        })?;
    }
    Ok(store)
}

// ------------------------------------------------------ tree datasets

fn noise_vector(r: &mut ChaCha8Rng) -> [f64; QUESTION_COUNT] {
    std::array::from_fn(|_| [0.0, 0.5, 1.0][r.random_range(0..3)])
}

fn set_low(v: &mut [f64; QUESTION_COUNT], q: usize, r: &mut ChaCha8Rng) {
    v[q - 1] = if r.random_bool(0.5) { 0.0 } else { 0.5 };
}

/// 400 samples labelled by three decision paths:
///
/// * `Q7 <= 0.5 and Q2 <= 0.5` gives Complex (180 samples)
/// * `Q7 <= 0.5 and Q2 > 0.5` gives NotComplex (20)
/// * `Q7 > 0.5 and Q9 <= 0.5 and Q5 <= 0.5` gives Complex (20)
/// * otherwise NotComplex (180)
///
/// Every other answer is seeded noise.
pub fn table3_dataset(seed: u64) -> (Vec<FeatureVector>, Vec<Label>) {
    let mut r = rng(seed);
    let mut xs = Vec::with_capacity(400);
    let mut ys = Vec::with_capacity(400);
    let mut push = |q7_low: bool, q2_low: Option<bool>, q9_low: Option<bool>, q5_low: Option<bool>, label: Label, r: &mut ChaCha8Rng| {
        let mut v = noise_vector(r);
        if q7_low { set_low(&mut v, 7, r) } else { v[6] = 1.0 }
        for (q, low) in [(2, q2_low), (9, q9_low), (5, q5_low)] {
            match low {
                Some(true) => set_low(&mut v, q, r),
                Some(false) => v[q - 1] = 1.0,
                None => {}
            }
        }
        xs.push(FeatureVector(v));
        ys.push(label);
    };
    for _ in 0..180 {
        push(true, Some(true), None, None, Label::Complex, &mut r);
    }
    for _ in 0..20 {
        push(true, Some(false), None, None, Label::NotComplex, &mut r);
    }
    for _ in 0..20 {
        push(false, None, Some(true), Some(true), Label::Complex, &mut r);
    }
    for _ in 0..20 {
        push(false, None, Some(true), Some(false), Label::NotComplex, &mut r);
    }
    for k in 0..160 {
        push(false, None, Some(false), Some(k % 2 == 0), Label::NotComplex, &mut r);
    }
    (xs, ys)
}

/// Random dataset over at most `active` questions; the rest stay 0.
pub fn random_dataset(seed: u64, n: usize, active: &[u8]) -> (Vec<FeatureVector>, Vec<Label>) {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let mut v = [0.0; QUESTION_COUNT];
            for &q in active {
                v[q as usize - 1] = [0.0, 0.5, 1.0][r.random_range(0..3)];
            }
            (FeatureVector(v), label_if(r.random_bool(0.5)))
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_diagnostic;

    #[test]
    fn screenshots_are_deterministic_pngs() {
        let a = srp_screenshot(3, 0.5, 0);
        assert_eq!(a, srp_screenshot(3, 0.5, 0));
        assert_ne!(a, srp_screenshot(3, 0.5, 1));
        assert_eq!(image::guess_format(&a).unwrap(), image::ImageFormat::Png);
    }

    #[test]
    fn fixture_plan_counts() {
        let truth = fixture_truth();
        assert_eq!(truth.len(), FIXTURE_SAMPLES);
        assert_eq!(truth.iter().filter(|(_, l)| l.is_complex()).count(), 8);
    }

    #[test]
    fn golden_cases_parse_to_expected() {
        for case in golden_corpus() {
            let parsed = parse_diagnostic(&case.raw).unwrap_or_else(|e| panic!("{}: {e}", case.name));
            let strict = case.name.ends_with("strict") || case.name.ends_with("compact");
            assert_eq!(parsed.repair_applied, !strict, "{}", case.name);
            assert_eq!(parsed.value, case.expected, "{}", case.name);
        }
    }

    #[test]
    fn mutations_fail_with_expected_class() {
        for case in mutation_corpus() {
            let err = parse_diagnostic(&case.raw).expect_err(&case.name);
            assert_eq!(err.kind(), case.expected_error, "{}: {err}", case.name);
        }
    }

    #[test]
    fn paired_labels_reproduce_matrices() {
        use crate::metrics::baseline::{DIAGNOSTIC_CONFUSION, STANDARD_CONFUSION};
        use crate::metrics::confusion;
        let rows = paired_labels(STANDARD_CONFUSION, DIAGNOSTIC_CONFUSION);
        let truth: Vec<Label> = rows.iter().map(|r| r.0).collect();
        let s: Vec<Label> = rows.iter().map(|r| r.1).collect();
        let d: Vec<Label> = rows.iter().map(|r| r.2).collect();
        assert_eq!(confusion(&truth, &s).unwrap(), STANDARD_CONFUSION);
        assert_eq!(confusion(&truth, &d).unwrap(), DIAGNOSTIC_CONFUSION);
    }

    #[test]
    fn table3_counts() {
        let (xs, ys) = table3_dataset(5);
        assert_eq!(xs.len(), 400);
        assert_eq!(ys.iter().filter(|l| l.is_complex()).count(), 200);
    }
}
