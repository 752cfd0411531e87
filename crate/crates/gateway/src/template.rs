use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    InstructorComputation,
    InstructorProof,
    CoderPlotcode,
    Judge,
    DebiasStep1,
    DebiasStep2,
    CotRewrite,
    ImageQc,
    Caption,
}

impl Role {
    pub const ALL: [Role; 9] = [
        Role::InstructorComputation,
        Role::InstructorProof,
        Role::CoderPlotcode,
        Role::Judge,
        Role::DebiasStep1,
        Role::DebiasStep2,
        Role::CotRewrite,
        Role::ImageQc,
        Role::Caption,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::InstructorComputation => "instructor_computation",
            Role::InstructorProof => "instructor_proof",
            Role::CoderPlotcode => "coder_plotcode",
            Role::Judge => "judge",
            Role::DebiasStep1 => "debias_step1",
            Role::DebiasStep2 => "debias_step2",
            Role::CotRewrite => "cot_rewrite",
            Role::ImageQc => "image_qc",
            Role::Caption => "caption",
        }
    }

    pub fn template(self) -> PromptTemplate {
        let text = match self {
            Role::InstructorComputation => include_str!("../templates/instructor_computation.txt"),
            Role::InstructorProof => include_str!("../templates/instructor_proof.txt"),
            Role::CoderPlotcode => include_str!("../templates/coder_plotcode.txt"),
            Role::Judge => include_str!("../templates/judge.txt"),
            Role::DebiasStep1 => include_str!("../templates/debias_step1.txt"),
            Role::DebiasStep2 => include_str!("../templates/debias_step2.txt"),
            Role::CotRewrite => include_str!("../templates/cot_rewrite.txt"),
            Role::ImageQc => include_str!("../templates/image_qc.txt"),
            Role::Caption => include_str!("../templates/caption.txt"),
        };
        PromptTemplate { role: self, text }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("{role}: no value for placeholder {{{name}}}")]
    Missing { role: Role, name: String },
    #[error("{role}: template has no placeholder {{{name}}}")]
    Unknown { role: Role, name: String },
    #[error("unknown role {0}")]
    UnknownRole(String),
}

/// A prompt with `{name}` placeholders, where `name` is lowercase
/// snake_case. Other braces (JSON skeletons, LaTeX groups) are literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role: Role,
    pub text: &'static str,
}

enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

fn is_slot_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z' | '_')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut lit_start = 0;
    let mut pos = 0;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'));
        match close {
            Some(k) if after[k..].starts_with('}') && is_slot_name(&after[..k]) => {
                out.push(Piece::Literal(&text[lit_start..pos + open]));
                out.push(Piece::Slot(&after[..k]));
                let consumed = open + 1 + k + 1;
                pos += consumed;
                lit_start = pos;
                rest = &rest[consumed..];
            }
            _ => {
                pos += open + 1;
                rest = &rest[open + 1..];
            }
        }
    }
    out.push(Piece::Literal(&text[lit_start..]));
    out
}

impl PromptTemplate {
    pub fn placeholders(&self) -> BTreeSet<&'static str> {
        pieces(self.text)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s),
                Piece::Literal(_) => None,
            })
            .collect()
    }

    /// Fills every placeholder in one pass; substituted text is not rescanned.
    pub fn render(&self, vars: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let slots = self.placeholders();
        if let Some(name) = vars.keys().find(|k| !slots.contains(k.as_str())) {
            return Err(TemplateError::Unknown {
                role: self.role,
                name: name.clone(),
            });
        }
        let mut out = String::with_capacity(self.text.len());
        for piece in pieces(self.text) {
            match piece {
                Piece::Literal(s) => out.push_str(s),
                Piece::Slot(name) => match vars.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(TemplateError::Missing {
                            role: self.role,
                            name: name.to_string(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

/// Builds a variable map from string pairs.
pub fn vars<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}
