use geoforge_core::schema::{Annotations, PlotCode};
use geoforge_gateway::{string_field, vars, Gateway, GatewayError, Role};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DebiasError {
    #[error("{role}: {source}")]
    Gateway { role: Role, source: GatewayError },
    #[error("{role}: response lacks string field {field}")]
    MissingField { role: Role, field: &'static str },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Debiased {
    pub question: String,
    pub cot: String,
    /// Annotated values still present in the rewritten question.
    pub flags: Vec<String>,
    pub raw_step1: String,
    /// Absent when there were no annotations to filter against.
    pub raw_step2: Option<String>,
    pub raw_cot: String,
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        word.to_string()
    } else {
        format!("{word}s")
    }
}

/// Annotations in the plain form the filtering prompt expects, e.g.
/// `Right angle annotation: angleBAC = 90degrees; Length annotations: AB = 3, AC = 6`.
pub fn annotation_text(ann: &Annotations) -> String {
    let mut groups = Vec::new();
    if !ann.right_angles.is_empty() {
        let items: Vec<String> = ann
            .right_angles
            .iter()
            .map(|[a, b, c]| format!("angle{a}{b}{c} = 90degrees"))
            .collect();
        groups.push(format!(
            "Right angle {}: {}",
            plural(items.len(), "annotation"),
            items.join(", ")
        ));
    }
    if !ann.length_of_line.is_empty() {
        let items: Vec<String> = ann
            .length_of_line
            .iter()
            .map(|([a, b], v)| format!("{a}{b} = {v}"))
            .collect();
        groups.push(format!("Length {}: {}", plural(items.len(), "annotation"), items.join(", ")));
    }
    if !ann.measure_of_angle.is_empty() {
        let items: Vec<String> = ann
            .measure_of_angle
            .iter()
            .map(|([a, b, c], v)| format!("angle{a}{b}{c} = {v}degrees"))
            .collect();
        groups.push(format!("Angle {}: {}", plural(items.len(), "annotation"), items.join(", ")));
    }
    groups.join("; ")
}

/// Plot code as handed to the rewriting prompts.
pub fn plotting_code_text(pc: &PlotCode) -> String {
    String::from_utf8(pc.canonical_bytes()).expect("JSON is UTF-8")
}

/// `needle` occurs not as part of a longer number or word. A period counts
/// as part of the number only when a digit sits on its far side.
fn standalone(text: &str, needle: &str) -> bool {
    let glued = |mut chars: std::iter::Peekable<Box<dyn Iterator<Item = char> + '_>>| match chars.next() {
        Some('.') => chars.peek().is_some_and(char::is_ascii_digit),
        Some(c) => c.is_alphanumeric() || c == '/',
        None => false,
    };
    text.match_indices(needle).any(|(i, _)| {
        let before: Box<dyn Iterator<Item = char>> = Box::new(text[..i].chars().rev());
        let after: Box<dyn Iterator<Item = char>> = Box::new(text[i + needle.len()..].chars());
        !glued(before.peekable()) && !glued(after.peekable())
    })
}

/// Annotated values that still appear as standalone tokens in `question`.
/// Right angles count as the value `90`.
pub fn surviving_literals(question: &str, ann: &Annotations) -> Vec<String> {
    let mut flags = Vec::new();
    for [a, b, c] in &ann.right_angles {
        if standalone(question, "90") {
            flags.push(format!("right angle {a}{b}{c}: 90 survives"));
        }
    }
    for ([a, b], v) in &ann.length_of_line {
        if standalone(question, v) {
            flags.push(format!("length {a}{b}: {v} survives"));
        }
    }
    for ([a, b, c], v) in &ann.measure_of_angle {
        if standalone(question, v) {
            flags.push(format!("angle {a}{b}{c}: {v} survives"));
        }
    }
    flags
}

pub fn step2_vars(question_simplified: &str, ann: &Annotations) -> std::collections::BTreeMap<String, String> {
    vars([
        ("question_simplified", question_simplified.to_string()),
        ("annotations", annotation_text(ann)),
    ])
}

fn ask(
    gw: &Gateway,
    role: Role,
    v: &std::collections::BTreeMap<String, String>,
    field: &'static str,
) -> Result<(String, String), DebiasError> {
    let (raw, value) = gw
        .complete_json(role, v)
        .map_err(|source| DebiasError::Gateway { role, source })?;
    let out = string_field(&value, field).ok_or(DebiasError::MissingField { role, field })?;
    Ok((raw, out))
}

/// Removes diagram-recoverable information from a question and rewrites the
/// reasoning against the plot code. The literal guard only flags.
pub fn debias(question: &str, cot: &str, pc: &PlotCode, gw: &Gateway) -> Result<Debiased, DebiasError> {
    let (raw_step1, q1) = ask(gw, Role::DebiasStep1, &vars([("question", question)]), "question_sanitized")?;
    let (raw_step2, q2) = if pc.annotations.is_empty() {
        (None, q1)
    } else {
        let (raw, q) = ask(gw, Role::DebiasStep2, &step2_vars(&q1, &pc.annotations), "question_sanitized")?;
        (Some(raw), q)
    };
    let (raw_cot, cot2) = ask(
        gw,
        Role::CotRewrite,
        &vars([("cot", cot.to_string()), ("plotting_code", plotting_code_text(pc))]),
        "cot",
    )?;
    Ok(Debiased {
        flags: surviving_literals(&q2, &pc.annotations),
        question: q2,
        cot: cot2,
        raw_step1,
        raw_step2,
        raw_cot,
    })
}
