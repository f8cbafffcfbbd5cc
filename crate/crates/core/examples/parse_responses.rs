//! Typed parsing of raw model output for both protocols, including the
//! bounded repairs and the error classes produced for bad replies.

use layoutjudge::parser::{parse_diagnostic, parse_gestalt, to_binary, DEFAULT_THRESHOLD};

fn diagnostic_json(score: &str, q13: Option<&str>) -> String {
    let mut answers: Vec<String> = (1..=25)
        .filter(|&q| q != 13 || q13.is_some())
        .map(|q| {
            let a = if q == 13 { q13.unwrap_or("No") } else if q % 3 == 0 { "Yes" } else { "No" };
            format!("    \"Q{q}\": \"{a}\"")
        })
        .collect();
    answers.last_mut().unwrap().push(',');
    format!(
        "{{\n  \"diagnostics\": {{\n{}\n  }},\n  \"complexity_score\": {score},\n  \"explanation\": \"Badges crowd every tile.\",\n}}",
        answers.join(",\n")
    )
}

fn main() {
    let replies = [
        ("fenced, trailing commas", format!("Here you go:\n```json\n{}\n```", diagnostic_json("2", Some("not sure")))),
        ("missing Q13", diagnostic_json("2", None)),
        ("score out of range", diagnostic_json("7", Some("Yes"))),
        ("score as string", diagnostic_json("\"2\"", Some("Yes"))),
        ("answer outside vocabulary", diagnostic_json("3", Some("Maybe"))),
        ("prose only", "I am unable to assess this page.".to_string()),
    ];
    for (name, raw) in &replies {
        match parse_diagnostic(raw) {
            Ok(p) => {
                let binary = to_binary(p.value.complexity_score, DEFAULT_THRESHOLD).expect("score in range");
                println!(
                    "{name:<26} ok  score {} -> {} (repaired: {}), Q13 = {}",
                    p.value.complexity_score,
                    binary.label,
                    p.repair_applied,
                    p.value.answers.get(13).map(|a| a.as_str()).unwrap_or("-")
                );
            }
            Err(e) => println!("{name:<26} err [{}] {e}", e.kind()),
        }
    }

    let gestalt = "**Law of Similarity: 4 points**\nTiles repeat the same layout.\n\
                   **Law of Proximity: 2 points**\n**Law of Pragnanz: 3 points**\n\
                   **Law of Closure: 4 points**\n**Law of Continuity: 3 points**\n\
                   **Law of Figure/Ground: 2 points**\n\nResult: 2";
    match parse_gestalt(gestalt) {
        Ok(g) => println!("gestalt                    ok  final {} similarity {} proximity {}", g.final_score, g.similarity, g.proximity),
        Err(e) => println!("gestalt                    err [{}] {e}", e.kind()),
    }
    let truncated = &gestalt[..gestalt.find("**Law of Closure").unwrap()];
    if let Err(e) = parse_gestalt(truncated) {
        println!("gestalt (truncated)        err [{}] {e}", e.kind());
    }
}
