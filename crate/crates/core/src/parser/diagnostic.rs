use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{repair, ParseError, Parsed};

pub const QUESTION_COUNT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Yes,
    No,
    NotSure,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "Yes",
            Answer::No => "No",
            Answer::NotSure => "Not Sure",
        }
    }

    /// Case-insensitive after collapsing inner whitespace; `NotSure` is
    /// accepted as a spelling of `Not Sure`.
    pub fn normalize(raw: &str) -> Option<Answer> {
        let folded = raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        match folded.as_str() {
            "yes" => Some(Answer::Yes),
            "no" => Some(Answer::No),
            "not sure" | "notsure" => Some(Answer::NotSure),
            _ => None,
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Answer::normalize(&s).ok_or_else(|| de::Error::custom(format!("invalid answer `{s}`")))
    }
}

/// Answers to Q1..Q25, index 0 holding Q1. Serialized as an ordered
/// `{"Q1": ..., "Q25": ...}` map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Answers(pub [Answer; QUESTION_COUNT]);

impl Answers {
    /// Answer to question `q` (1-based).
    pub fn get(&self, q: u8) -> Option<Answer> {
        (1..=QUESTION_COUNT as u8).contains(&q).then(|| self.0[q as usize - 1])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, Answer)> + '_ {
        self.0.iter().enumerate().map(|(i, a)| (i as u8 + 1, *a))
    }
}

impl Serialize for Answers {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(QUESTION_COUNT))?;
        for (q, a) in self.iter() {
            map.serialize_entry(&format!("Q{q}"), &a)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Answers {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Pairs::deserialize(d)?;
        answers_from_pairs(&pairs.0).map_err(de::Error::custom)
    }
}

/// Diagnostic-protocol output: 25 answers, a 1-5 score and an explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticResponse {
    #[serde(rename = "diagnostics")]
    pub answers: Answers,
    pub complexity_score: u8,
    pub explanation: String,
}

impl DiagnosticResponse {
    /// Renders the response in the output schema the prompt asks for.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostic response serializes")
    }
}

/// JSON object kept as ordered key/value pairs so duplicate keys survive.
struct Pairs(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Pairs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PairsVisitor;
        impl<'de> Visitor<'de> for PairsVisitor {
            type Value = Pairs;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Pairs, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Pairs(out))
            }
        }
        d.deserialize_map(PairsVisitor)
    }
}

fn question_number(key: &str) -> Option<u8> {
    let digits = key.strip_prefix('Q').or_else(|| key.strip_prefix('q'))?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let n: u8 = digits.parse().ok()?;
    (1..=QUESTION_COUNT as u8).contains(&n).then_some(n)
}

fn answers_from_pairs(pairs: &[(String, Value)]) -> Result<Answers, ParseError> {
    let mut slots: [Option<Answer>; QUESTION_COUNT] = [None; QUESTION_COUNT];
    for (key, value) in pairs {
        let q = question_number(key).ok_or_else(|| ParseError::UnexpectedKey { key: key.clone() })?;
        let slot = &mut slots[q as usize - 1];
        if slot.is_some() {
            return Err(ParseError::DuplicateQuestion { question: q });
        }
        let text = match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        *slot = Some(
            Answer::normalize(&text)
                .ok_or(ParseError::InvalidAnswer { question: q, value: text })?,
        );
    }
    let mut answers = [Answer::No; QUESTION_COUNT];
    for (i, slot) in slots.iter().enumerate() {
        answers[i] = slot.ok_or(ParseError::MissingQuestion { question: i as u8 + 1 })?;
    }
    Ok(Answers(answers))
}

#[derive(Deserialize)]
struct Envelope {
    diagnostics: Option<Pairs>,
    complexity_score: Option<Value>,
    explanation: Option<Value>,
}

pub(super) fn score_from_value(field: &str, value: &Value, min: u8, max: u8) -> Result<u8, ParseError> {
    let n = value.as_i64().ok_or_else(|| ParseError::InvalidField {
        field: field.to_string(),
        detail: format!("expected an integer, found {value}"),
    })?;
    if n < min as i64 || n > max as i64 {
        return Err(ParseError::ScoreOutOfRange { field: field.to_string(), value: n, min, max });
    }
    Ok(n as u8)
}

fn validate(json: &str) -> Result<DiagnosticResponse, ParseError> {
    let envelope: Envelope = serde_json::from_str(json).map_err(|e| ParseError::InvalidField {
        field: "diagnostics".into(),
        detail: e.to_string(),
    })?;
    let pairs = envelope
        .diagnostics
        .ok_or_else(|| ParseError::MissingField { field: "diagnostics".into() })?;
    let answers = answers_from_pairs(&pairs.0)?;
    let score = envelope
        .complexity_score
        .ok_or_else(|| ParseError::MissingField { field: "complexity_score".into() })?;
    let complexity_score = score_from_value("complexity_score", &score, 1, 5)?;
    let explanation = match envelope.explanation {
        Some(Value::String(s)) => s,
        Some(other) => {
            return Err(ParseError::InvalidField {
                field: "explanation".into(),
                detail: format!("expected a string, found {other}"),
            })
        }
        None => return Err(ParseError::MissingField { field: "explanation".into() }),
    };
    Ok(DiagnosticResponse { answers, complexity_score, explanation })
}

fn is_object(json: &str) -> Result<bool, serde_json::Error> {
    serde_json::from_str::<Value>(json).map(|v| v.is_object())
}

/// Parses a diagnostic-protocol reply.
///
/// A payload that is already a valid JSON object is validated as-is. Only
/// when strict parsing fails is the repair pipeline applied (code fences,
/// outer-block extraction, trailing commas) and the result re-parsed.
pub fn parse_diagnostic(raw: &str) -> Result<Parsed<DiagnosticResponse>, ParseError> {
    match is_object(raw) {
        Ok(true) => {
            return validate(raw).map(|value| Parsed { value, repair_applied: false });
        }
        Ok(false) => {
            return Err(ParseError::NoParseableBlock {
                detail: "top-level JSON value is not an object".into(),
            })
        }
        Err(_) => {}
    }
    let repaired = repair::repair(raw).ok_or_else(|| ParseError::NoParseableBlock {
        detail: "no brace-delimited block found".into(),
    })?;
    match is_object(&repaired) {
        Ok(true) => validate(&repaired).map(|value| Parsed { value, repair_applied: true }),
        Ok(false) => Err(ParseError::NoParseableBlock {
            detail: "repaired block is not an object".into(),
        }),
        Err(e) => Err(ParseError::NoParseableBlock { detail: e.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The output schema example with the elided questions filled in:
    /// odd questions Yes, even questions No, Q25 Yes, score 2.
    fn schema_example() -> String {
        let mut body = String::from("{\n  \"diagnostics\": {\n");
        for q in 1..=25 {
            let a = if q % 2 == 1 { "Yes" } else { "No" };
            let sep = if q == 25 { "" } else { "," };
            body.push_str(&format!("    \"Q{q}\": \"{a}\"{sep}\n"));
        }
        body.push_str("  },\n  \"complexity_score\": 2,\n  \"explanation\": \"The page feels dense and overwhelming with too many competing visual elements making it difficult to scan quickly.\"\n}");
        body
    }

    #[test]
    fn schema_example_parses_strictly() {
        let parsed = parse_diagnostic(&schema_example()).unwrap();
        assert!(!parsed.repair_applied);
        assert_eq!(parsed.value.complexity_score, 2);
        assert_eq!(parsed.value.answers.get(1), Some(Answer::Yes));
        assert_eq!(parsed.value.answers.get(2), Some(Answer::No));
        assert_eq!(parsed.value.answers.get(25), Some(Answer::Yes));
    }

    #[test]
    fn fenced_with_trailing_comma_matches_strict() {
        let strict = parse_diagnostic(&schema_example()).unwrap();
        let fenced = format!(
            "Here you go:\n```json\n{}\n```\n",
            schema_example().replace("\"Q25\": \"Yes\"\n", "\"Q25\": \"Yes\",\n")
        );
        let parsed = parse_diagnostic(&fenced).unwrap();
        assert!(parsed.repair_applied);
        assert_eq!(parsed.value, strict.value);
    }

    #[test]
    fn missing_q13_is_named() {
        let text = schema_example().replace("    \"Q13\": \"Yes\",\n", "");
        assert_eq!(
            parse_diagnostic(&text).unwrap_err(),
            ParseError::MissingQuestion { question: 13 }
        );
    }

    #[test]
    fn answer_normalization() {
        for (raw, want) in [
            ("yes", Answer::Yes),
            (" NO ", Answer::No),
            ("Not Sure", Answer::NotSure),
            ("not   sure", Answer::NotSure),
            ("NotSure", Answer::NotSure),
        ] {
            assert_eq!(Answer::normalize(raw), Some(want), "{raw}");
        }
        assert_eq!(Answer::normalize("maybe"), None);
        assert_eq!(Answer::normalize("Not-Sure"), None);
    }

    #[test]
    fn typed_errors() {
        let base = schema_example();
        let cases = [
            (base.replace("\"complexity_score\": 2", "\"complexity_score\": 6"), "score_out_of_range"),
            (base.replace("\"complexity_score\": 2", "\"complexity_score\": 0"), "score_out_of_range"),
            (base.replace("\"complexity_score\": 2", "\"complexity_score\": 2.5"), "invalid_field"),
            (base.replace("\"complexity_score\": 2,", ""), "missing_field"),
            (base.replace("\"Q4\": \"No\"", "\"Q4\": \"Maybe\""), "invalid_answer"),
            (base.replace("\"Q4\": \"No\"", "\"Q26\": \"No\""), "unexpected_key"),
            (base.replace("\"Q4\": \"No\"", "\"Q3\": \"No\""), "duplicate_question"),
            ("I cannot evaluate this image.".to_string(), "no_parseable_block"),
            ("[1, 2, 3]".to_string(), "no_parseable_block"),
        ];
        for (text, kind) in cases {
            assert_eq!(parse_diagnostic(&text).unwrap_err().kind(), kind, "{text}");
        }
    }

    #[test]
    fn serialization_round_trips() {
        let parsed = parse_diagnostic(&schema_example()).unwrap().value;
        let again = parse_diagnostic(&parsed.to_json()).unwrap();
        assert!(!again.repair_applied);
        assert_eq!(again.value, parsed);
    }
}
