use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Principle {
    Similarity,
    Proximity,
    Pragnanz,
    Closure,
    Continuity,
    FigureGround,
}

impl Principle {
    pub const ALL: [Principle; 6] = [
        Principle::Similarity,
        Principle::Proximity,
        Principle::Pragnanz,
        Principle::Closure,
        Principle::Continuity,
        Principle::FigureGround,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Principle::Similarity => "similarity",
            Principle::Proximity => "proximity",
            Principle::Pragnanz => "pragnanz",
            Principle::Closure => "closure",
            Principle::Continuity => "continuity",
            Principle::FigureGround => "figure_ground",
        }
    }

    /// Heading used in the prompt's scoring rubric.
    pub fn heading(self) -> &'static str {
        match self {
            Principle::Similarity => "Law of Similarity",
            Principle::Proximity => "Law of Proximity",
            Principle::Pragnanz => "Law of Pragnanz",
            Principle::Closure => "Law of Closure",
            Principle::Continuity => "Law of Continuity",
            Principle::FigureGround => "Law of Figure/Ground",
        }
    }

    /// Highest score the rubric defines (proximity has a 3-point scale).
    pub fn max_score(self) -> u8 {
        match self {
            Principle::Proximity => 3,
            _ => 5,
        }
    }
}

/// Standard-protocol output: six principle scores and a final 1-5 score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestaltAssessment {
    pub similarity: u8,
    pub proximity: u8,
    pub pragnanz: u8,
    pub closure: u8,
    pub continuity: u8,
    pub figure_ground: u8,
    pub final_score: u8,
    /// The model's full free-text answer.
    pub rationale_text: String,
}

impl GestaltAssessment {
    pub fn score(&self, p: Principle) -> u8 {
        match p {
            Principle::Similarity => self.similarity,
            Principle::Proximity => self.proximity,
            Principle::Pragnanz => self.pragnanz,
            Principle::Closure => self.closure,
            Principle::Continuity => self.continuity,
            Principle::FigureGround => self.figure_ground,
        }
    }

    /// Builds an assessment whose rationale is the canonical text rendering
    /// of the scores followed by `comment`.
    pub fn render(scores: [u8; 6], final_score: u8, comment: &str) -> GestaltAssessment {
        let mut text = String::new();
        for (p, s) in Principle::ALL.iter().zip(scores) {
            let unit = if s == 1 { "point" } else { "points" };
            text.push_str(&format!("{}: {s} {unit}\n", p.heading()));
        }
        if !comment.is_empty() {
            text.push('\n');
            text.push_str(comment);
            text.push('\n');
        }
        text.push_str(&format!("\nResult: {final_score}\n"));
        GestaltAssessment {
            similarity: scores[0],
            proximity: scores[1],
            pragnanz: scores[2],
            closure: scores[3],
            continuity: scores[4],
            figure_ground: scores[5],
            final_score,
            rationale_text: text,
        }
    }
}

static PRINCIPLE_PATTERNS: LazyLock<Vec<(Principle, Regex)>> = LazyLock::new(|| {
    [
        (Principle::Similarity, r"similarity"),
        (Principle::Proximity, r"proximity"),
        (Principle::Pragnanz, r"pr(?:a|ä|ae)gnanz"),
        (Principle::Closure, r"closure"),
        (Principle::Continuity, r"continuity"),
        (Principle::FigureGround, r"figure\s*[/\-]?\s*ground"),
    ]
    .into_iter()
    .map(|(p, re)| (p, Regex::new(re).expect("static regex")))
    .collect()
});

static POINTS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(-?\d+)\s*points?\b").expect("static regex"));
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+").expect("static regex"));

/// Leftmost principle named on a (lower-cased) line and where its name ends.
fn principle_on_line(line: &str) -> Option<(Principle, usize)> {
    PRINCIPLE_PATTERNS
        .iter()
        .filter_map(|(p, re)| re.find(line).map(|m| (m.start(), m.end(), *p)))
        .min_by_key(|(start, _, _)| *start)
        .map(|(_, end, p)| (p, end))
}

fn points_in(text: &str) -> Option<i64> {
    POINTS.captures(text).and_then(|c| c[1].parse().ok())
}

fn result_score(line: &str) -> Option<i64> {
    let stripped = line.trim_start_matches(|c: char| c.is_whitespace() || "*#->_".contains(c));
    let rest = stripped.strip_prefix("result")?;
    INTEGER.find(rest).and_then(|m| m.as_str().parse().ok())
}

/// Parses a standard-protocol reply.
///
/// Each line naming a principle contributes the first `<n> point(s)` after
/// the name; a heading line without a score hands its principle to the next
/// line that has one. The final score comes from the last `Result:` line
/// carrying an integer.
pub fn parse_gestalt(raw: &str) -> Result<GestaltAssessment, ParseError> {
    let mut scores: [Option<i64>; 6] = [None; 6];
    let mut pending: Option<Principle> = None;
    let mut final_score: Option<i64> = None;

    for line in raw.lines() {
        let lower = line.to_lowercase();
        if let Some(score) = result_score(&lower) {
            final_score = Some(score);
            pending = None;
            continue;
        }
        let (principle, score) = match principle_on_line(&lower) {
            Some((p, end)) => (Some(p), points_in(&lower[end..])),
            None => (pending, points_in(&lower)),
        };
        let Some(principle) = principle else { continue };
        let idx = Principle::ALL.iter().position(|p| *p == principle).expect("known principle");
        match score {
            Some(s) => {
                if scores[idx].is_none() {
                    scores[idx] = Some(s);
                }
                pending = None;
            }
            None => pending = Some(principle),
        }
    }

    let mut checked = [0u8; 6];
    for (i, p) in Principle::ALL.iter().enumerate() {
        let value = scores[i]
            .ok_or_else(|| ParseError::MissingPrincipleScore { principle: p.name().into() })?;
        if value < 1 || value > p.max_score() as i64 {
            return Err(ParseError::ScoreOutOfRange {
                field: p.name().into(),
                value,
                min: 1,
                max: p.max_score(),
            });
        }
        checked[i] = value as u8;
    }
    let final_score = final_score.ok_or(ParseError::MissingFinalScore)?;
    if !(1..=5).contains(&final_score) {
        return Err(ParseError::ScoreOutOfRange {
            field: "final_score".into(),
            value: final_score,
            min: 1,
            max: 5,
        });
    }
    Ok(GestaltAssessment {
        similarity: checked[0],
        proximity: checked[1],
        pragnanz: checked[2],
        closure: checked[3],
        continuity: checked[4],
        figure_ground: checked[5],
        final_score: final_score as u8,
        rationale_text: raw.to_string(),
    })
}
