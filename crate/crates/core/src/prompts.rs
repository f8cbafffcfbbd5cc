//! Verbatim prompt resources and request rendering.
//!
//! Both prompt texts ship as UTF-8 files under `resources/prompts/` with
//! SHA-256 pins in `registry.json`. Rendering never edits prompt wording:
//! the request carries exactly one text part holding the resource text
//! byte-for-byte, followed by the screenshots in stitch order.

use std::borrow::Cow;
use std::io::Cursor;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, MediaType, Protocol, Sample, Store};
use crate::digest::sha256_hex;

const STANDARD_TEXT: &str = include_str!("../resources/prompts/standard.txt");
const DIAGNOSTIC_TEXT: &str = include_str!("../resources/prompts/diagnostic.txt");
const REGISTRY_JSON: &str = include_str!("../resources/prompts/registry.json");

/// Default sampling temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;
/// Default output budget; fits the largest diagnostic JSON plus explanation.
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOutput {
    FreeTextScored,
    StrictJson,
}

#[derive(Debug, Clone, Deserialize)]
struct RegistryEntry {
    kind: Protocol,
    file: String,
    expected_output: ExpectedOutput,
    sha256: String,
}

#[derive(Debug, Clone, Deserialize)]
struct Registry {
    prompts: Vec<RegistryEntry>,
}

fn registry() -> Registry {
    serde_json::from_str(REGISTRY_JSON).expect("bundled prompt registry is valid JSON")
}

/// Pinned digest for a built-in prompt, as listed in the registry file.
pub fn pinned_digest(kind: Protocol) -> String {
    registry()
        .prompts
        .into_iter()
        .find(|e| e.kind == kind)
        .map(|e| e.sha256)
        .expect("registry lists both protocols")
}

/// Registry file name for a built-in prompt.
pub fn resource_file(kind: Protocol) -> String {
    registry()
        .prompts
        .into_iter()
        .find(|e| e.kind == kind)
        .map(|e| e.file)
        .expect("registry lists both protocols")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptProtocol {
    pub kind: Protocol,
    text: Cow<'static, str>,
}

impl PromptProtocol {
    /// The shipped prompt for `kind`.
    pub fn builtin(kind: Protocol) -> Self {
        let text = match kind {
            Protocol::Standard => STANDARD_TEXT,
            Protocol::Diagnostic => DIAGNOSTIC_TEXT,
        };
        Self { kind, text: Cow::Borrowed(text) }
    }

    /// A prompt with caller-supplied text; its digest will not match the
    /// registry pin.
    pub fn custom(kind: Protocol, text: impl Into<String>) -> Self {
        Self { kind, text: Cow::Owned(text.into()) }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn expected_output(&self) -> ExpectedOutput {
        match self.kind {
            Protocol::Standard => ExpectedOutput::FreeTextScored,
            Protocol::Diagnostic => ExpectedOutput::StrictJson,
        }
    }

    /// Whether the text is byte-identical to the pinned resource.
    pub fn is_pinned(&self) -> bool {
        prompt_digest(self) == pinned_digest(self.kind)
    }
}

/// Hex SHA-256 of the prompt text.
pub fn prompt_digest(protocol: &PromptProtocol) -> String {
    sha256_hex(protocol.text().as_bytes())
}

/// Checks every registry entry against the compiled-in resource text.
pub fn verify_registry() -> Result<(), String> {
    for entry in registry().prompts {
        let p = PromptProtocol::builtin(entry.kind);
        if p.expected_output() != entry.expected_output {
            return Err(format!("{}: expected_output mismatch", entry.file));
        }
        let actual = prompt_digest(&p);
        if actual != entry.sha256 {
            return Err(format!("{}: pinned {} but text hashes to {actual}", entry.file, entry.sha256));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Forwarded only when the endpoint supports seeding.
    pub seed: Option<u64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            seed: None,
        }
    }
}

/// How a Diagnostic request uses a multi-screenshot sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticImages {
    /// Topmost screenshot only.
    #[default]
    First,
    /// All screenshots stitched vertically into one PNG.
    Stitch,
}

impl DiagnosticImages {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticImages::First => "first",
            DiagnosticImages::Stitch => "stitch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    Image { media_type: MediaType, data_base64: String },
}

/// A fully rendered, transport-neutral request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedRequest {
    pub protocol: Protocol,
    pub prompt_digest: String,
    pub parts: Vec<ContentPart>,
    pub sampling: SamplingConfig,
}

impl RenderedRequest {
    /// Digest of the canonical JSON encoding; keys record/replay sessions.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_vec(self).expect("request serializes"))
    }

    pub fn image_count(&self) -> usize {
        self.parts.iter().filter(|p| matches!(p, ContentPart::Image { .. })).count()
    }

    pub fn text(&self) -> Option<&str> {
        self.parts.iter().find_map(|p| match p {
            ContentPart::Text { text } => Some(text.as_str()),
            ContentPart::Image { .. } => None,
        })
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("sample `{sample}` screenshot {index} is not PNG or JPEG")]
    UnsupportedMediaType { sample: String, index: usize },
    #[error("sample `{0}` has no screenshots")]
    NoScreenshots(String),
    #[error("sample `{sample}`: cannot stitch screenshots: {reason}")]
    Stitch { sample: String, reason: String },
}

fn sniff(bytes: &[u8]) -> Option<MediaType> {
    match image::guess_format(bytes).ok()? {
        image::ImageFormat::Png => Some(MediaType::Png),
        image::ImageFormat::Jpeg => Some(MediaType::Jpeg),
        _ => None,
    }
}

fn stitch_vertical(sample: &str, images: &[Vec<u8>]) -> Result<Vec<u8>, RenderError> {
    let fail = |reason: String| RenderError::Stitch { sample: sample.to_string(), reason };
    let decoded = images
        .iter()
        .map(|b| image::load_from_memory(b).map(|i| i.to_rgb8()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| fail(e.to_string()))?;
    let width = decoded.iter().map(|i| i.width()).max().unwrap_or(0);
    let height = decoded.iter().map(|i| i.height()).sum();
    let mut canvas = image::RgbImage::from_pixel(width, height, image::Rgb([255, 255, 255]));
    let mut y = 0i64;
    for img in &decoded {
        image::imageops::overlay(&mut canvas, img, 0, y);
        y += img.height() as i64;
    }
    let mut out = Cursor::new(Vec::new());
    canvas.write_to(&mut out, image::ImageFormat::Png).map_err(|e| fail(e.to_string()))?;
    Ok(out.into_inner())
}

/// Renders the request for one sample. Pure over (sample, protocol,
/// sampling, stored image bytes).
///
/// Standard requests carry every screenshot in order; Diagnostic requests
/// carry exactly one image (the first screenshot, or the stitched composite).
pub fn render(
    store: &Store,
    sample: &Sample,
    protocol: &PromptProtocol,
    sampling: &SamplingConfig,
    diagnostic_images: DiagnosticImages,
) -> Result<RenderedRequest, RenderError> {
    let screenshots = sample
        .screenshots
        .iter()
        .map(|shot| store.read_image(shot))
        .collect::<Result<Vec<_>, _>>()?;
    render_bytes(&sample.id, screenshots, protocol, sampling, diagnostic_images)
}

/// [`render`] over screenshot bytes already in memory, in stitch order.
pub fn render_bytes(
    sample_id: &str,
    screenshots: Vec<Vec<u8>>,
    protocol: &PromptProtocol,
    sampling: &SamplingConfig,
    diagnostic_images: DiagnosticImages,
) -> Result<RenderedRequest, RenderError> {
    if screenshots.is_empty() {
        return Err(RenderError::NoScreenshots(sample_id.to_string()));
    }
    let mut images = Vec::with_capacity(screenshots.len());
    for (index, bytes) in screenshots.into_iter().enumerate() {
        let media_type = sniff(&bytes).ok_or_else(|| RenderError::UnsupportedMediaType {
            sample: sample_id.to_string(),
            index,
        })?;
        images.push((media_type, bytes));
    }
    let selected: Vec<(MediaType, Vec<u8>)> = match protocol.kind {
        Protocol::Standard => images,
        Protocol::Diagnostic => match diagnostic_images {
            DiagnosticImages::First => images.into_iter().take(1).collect(),
            DiagnosticImages::Stitch if images.len() > 1 => {
                let raw: Vec<Vec<u8>> = images.into_iter().map(|(_, b)| b).collect();
                vec![(MediaType::Png, stitch_vertical(sample_id, &raw)?)]
            }
            DiagnosticImages::Stitch => images,
        },
    };

    let engine = base64::engine::general_purpose::STANDARD;
    let mut parts = vec![ContentPart::Text { text: protocol.text().to_string() }];
    parts.extend(selected.into_iter().map(|(media_type, bytes)| ContentPart::Image {
        media_type,
        data_base64: engine.encode(bytes),
    }));
    Ok(RenderedRequest {
        protocol: protocol.kind,
        prompt_digest: prompt_digest(protocol),
        parts,
        sampling: sampling.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, ManifestEntry};
    use std::path::{Path, PathBuf};

    fn store_with_sample(dir: &Path, shots: usize) -> (Store, Sample) {
        let mut paths = Vec::new();
        for k in 0..shots {
            let p = dir.join(format!("shot{k}.png"));
            image::RgbImage::from_pixel(4, 3 + k as u32, image::Rgb([k as u8 * 40, 0, 0]))
                .save(&p)
                .unwrap();
            paths.push(PathBuf::from(format!("shot{k}.png")));
        }
        let mut store = Store::open(dir.join("corpus")).unwrap();
        store
            .ingest_entries(
                &[ManifestEntry {
                    id: "s1".into(),
                    query: "dancing cactus toy".into(),
                    category: Category::Hardlines,
                    screenshots: paths,
                    created_at: None,
                }],
                dir,
            )
            .unwrap();
        let sample = store.sample("s1").unwrap().clone();
        (store, sample)
    }

    #[test]
    fn registry_pins_match_resources() {
        verify_registry().unwrap();
        for kind in [Protocol::Standard, Protocol::Diagnostic] {
            let p = PromptProtocol::builtin(kind);
            assert!(p.is_pinned());
            assert_eq!(prompt_digest(&p), pinned_digest(kind));
        }
    }

    #[test]
    fn one_byte_changes_digest() {
        let p = PromptProtocol::builtin(Protocol::Diagnostic);
        let mut text = p.text().to_string();
        text.replace_range(0..1, "$");
        let edited = PromptProtocol::custom(Protocol::Diagnostic, text);
        assert_ne!(prompt_digest(&edited), prompt_digest(&p));
        assert!(!edited.is_pinned());
    }

    #[test]
    fn prompt_texts_are_the_published_ones() {
        let std = PromptProtocol::builtin(Protocol::Standard);
        assert!(std.text().starts_with("### Instructions: \nYou are an HCI researcher"));
        assert!(std.text().trim_end().ends_with("### Sample Input:"));
        let diag = PromptProtocol::builtin(Protocol::Diagnostic);
        assert!(diag.text().contains("**Q25.** Are there other visual complexity factors"));
        assert!(diag.text().trim_end().ends_with('}'));
        assert_eq!(std.expected_output(), ExpectedOutput::FreeTextScored);
        assert_eq!(diag.expected_output(), ExpectedOutput::StrictJson);
    }

    #[test]
    fn standard_carries_all_screenshots_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let (store, sample) = store_with_sample(dir.path(), 3);
        let protocol = PromptProtocol::builtin(Protocol::Standard);
        let req = render(&store, &sample, &protocol, &SamplingConfig::default(), DiagnosticImages::First)
            .unwrap();
        assert_eq!(req.image_count(), 3);
        assert!(matches!(&req.parts[0], ContentPart::Text { text } if text == protocol.text()));
        let engine = base64::engine::general_purpose::STANDARD;
        for (k, part) in req.parts[1..].iter().enumerate() {
            let ContentPart::Image { data_base64, .. } = part else { panic!("image part") };
            let bytes = engine.decode(data_base64).unwrap();
            assert_eq!(sha256_hex(bytes), sample.screenshots[k].sha256);
        }
    }

    #[test]
    fn diagnostic_uses_one_image() {
        let dir = tempfile::tempdir().unwrap();
        let (store, sample) = store_with_sample(dir.path(), 3);
        let protocol = PromptProtocol::builtin(Protocol::Diagnostic);
        let sampling = SamplingConfig::default();
        let first = render(&store, &sample, &protocol, &sampling, DiagnosticImages::First).unwrap();
        assert_eq!(first.image_count(), 1);
        let stitched = render(&store, &sample, &protocol, &sampling, DiagnosticImages::Stitch).unwrap();
        assert_eq!(stitched.image_count(), 1);
        let ContentPart::Image { data_base64, .. } = &stitched.parts[1] else { panic!() };
        let bytes = base64::engine::general_purpose::STANDARD.decode(data_base64).unwrap();
        let img = image::load_from_memory(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (4, 3 + 4 + 5));
    }

    #[test]
    fn rendering_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (store, sample) = store_with_sample(dir.path(), 1);
        let protocol = PromptProtocol::builtin(Protocol::Diagnostic);
        let sampling = SamplingConfig::default();
        let a = render(&store, &sample, &protocol, &sampling, DiagnosticImages::Stitch).unwrap();
        let b = render(&store, &sample, &protocol, &sampling, DiagnosticImages::Stitch).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.image_count(), 1);
        assert_eq!(a.prompt_digest, prompt_digest(&protocol));
    }

    #[test]
    fn missing_image_file() {
        let dir = tempfile::tempdir().unwrap();
        let (store, sample) = store_with_sample(dir.path(), 1);
        std::fs::remove_file(store.image_path(&sample.screenshots[0])).unwrap();
        let protocol = PromptProtocol::builtin(Protocol::Standard);
        let err = render(&store, &sample, &protocol, &SamplingConfig::default(), DiagnosticImages::First)
            .unwrap_err();
        assert!(matches!(err, RenderError::Corpus(CorpusError::Io { .. })));
    }
}
