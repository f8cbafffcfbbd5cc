//! Bounded repair for near-valid JSON: code fences, trailing commas and
//! surrounding prose. Nothing else is guessed.

/// Returns the body of the first fenced code block, or the input unchanged
/// when there is no fence. An unterminated fence yields everything after
/// the opening line.
pub fn strip_code_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text;
    };
    let after_open = &text[open + 3..];
    // skip the info string (e.g. `json`) up to the end of the fence line
    let body_start = after_open.find('\n').map(|i| i + 1).unwrap_or(after_open.len());
    let body = &after_open[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// Drops commas that directly precede `}` or `]`, ignoring string contents.
pub fn remove_trailing_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some('}') | Some(']')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

/// The outermost `{ ... }` block, matched with string-aware brace counting.
/// Falls back to the last `}` when braces never balance.
pub fn extract_outer_block(text: &str) -> Option<&str> {
    balanced_block(text).or_else(|| {
        let start = text.find('{')?;
        let end = text.rfind('}')?;
        (end > start).then(|| &text[start..=end])
    })
}

/// The first `{ ... }` block whose braces balance outside strings.
fn balanced_block(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, c) in text[start..].char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Full pipeline: fences, then outer block, then trailing commas.
///
/// A fence marker inside a JSON string cuts the fenced body short; when
/// that body never balances, the block is taken from the whole text.
pub fn repair(text: &str) -> Option<String> {
    let unfenced = strip_code_fences(text);
    let block = balanced_block(unfenced)
        .or_else(|| balanced_block(text))
        .or_else(|| extract_outer_block(unfenced))?;
    Some(remove_trailing_commas(block))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fences() {
        assert_eq!(strip_code_fences("```json\n{\"a\":1}\n```\n"), "{\"a\":1}\n");
        assert_eq!(strip_code_fences("pre\n```\n{}\n```"), "{}\n");
        assert_eq!(strip_code_fences("{}"), "{}");
        assert_eq!(strip_code_fences("```json\n{}"), "{}");
    }

    #[test]
    fn trailing_commas_outside_strings_only() {
        assert_eq!(remove_trailing_commas("{\"a\": [1, 2,], }"), "{\"a\": [1, 2] }");
        assert_eq!(remove_trailing_commas("{\"a\": \",}\"}"), "{\"a\": \",}\"}");
        assert_eq!(remove_trailing_commas("{\"a\": \"x\\\",\" ,\n}"), "{\"a\": \"x\\\",\" \n}");
    }

    #[test]
    fn outer_block() {
        assert_eq!(extract_outer_block("Sure! {\"a\": {\"b\": \"}\"}} bye"), Some("{\"a\": {\"b\": \"}\"}}"));
        assert_eq!(extract_outer_block("no braces"), None);
        assert_eq!(extract_outer_block("{ {\"a\": 1} }} tail"), Some("{ {\"a\": 1} }"));
    }

    #[test]
    fn fence_marker_inside_string() {
        let text = "```json\n{\"a\": \"x```y\",}\n```";
        assert_eq!(repair(text).as_deref(), Some("{\"a\": \"x```y\"}"));
    }
}
