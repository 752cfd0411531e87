use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractionError {
    #[error("no JSON object found in model output")]
    NoObject,
}

/// Body of the first fenced block, language tag dropped.
fn fenced(text: &str) -> Option<&str> {
    let start = text.find("```")? + 3;
    let body = &text[start..];
    let body = match body.find('\n') {
        Some(nl) if !body[..nl].contains('{') => &body[nl + 1..],
        _ => body,
    };
    Some(match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    })
}

/// End (exclusive) of the brace group opening at `start`, skipping string
/// literals.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_str {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn first_object(text: &str) -> Option<Value> {
    text.match_indices('{').find_map(|(i, _)| {
        let end = balanced_end(text, i)?;
        match serde_json::from_str::<Value>(&text[i..end]) {
            Ok(v @ Value::Object(_)) => Some(v),
            _ => None,
        }
    })
}

/// First balanced JSON object in model output, preferring the contents of a
/// code fence. Surrounding prose is ignored.
pub fn extract_json(text: &str) -> Result<Value, ExtractionError> {
    fenced(text)
        .and_then(first_object)
        .or_else(|| first_object(text))
        .ok_or(ExtractionError::NoObject)
}

/// String field of an extracted object.
pub fn string_field(v: &Value, key: &str) -> Option<String> {
    v.get(key).and_then(Value::as_str).map(str::to_string)
}
