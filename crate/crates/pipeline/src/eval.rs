//! Scoring predicted plot code against reference plot code.
//!
//! Each JSONL line is either a bare plot-code object or a wrapper
//! `{"id", "plot_code", "solved"}` where `plot_code` may also be raw model
//! text. Dataset records are wrappers too. Lines are paired by `id` when
//! every line carries one, otherwise by position.

use std::collections::BTreeMap;

use geoforge_core::metrics::{annotation_match, bin_by_score, segment_f1, AnnotationMatch, Bin, F1Report};
use geoforge_core::schema::{plotcode_from_value, ParseMode, PlotCode};
use geoforge_gateway::extract_json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("truth line {line}: {message}")]
    Truth { line: usize, message: String },
    #[error("{pred} predictions for {truth} references")]
    CountMismatch { pred: usize, truth: usize },
    #[error("no reference with id {0}")]
    UnknownId(String),
    #[error(transparent)]
    Binning(#[from] geoforge_core::metrics::BinningError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub parsed: bool,
    pub segments: F1Report,
    /// Absent when the prediction did not parse.
    pub annotations: Option<AnnotationMatch>,
    pub solved: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationStats {
    pub evaluated: usize,
    pub fully_correct: usize,
    pub fully_correct_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: Vec<SampleScore>,
    pub parse_rate: f64,
    pub mean_f1: f64,
    pub annotations: AnnotationStats,
    /// Accuracy by segment-F1 bin; only when every prediction says whether
    /// it was solved.
    pub bins: Option<Vec<Bin>>,
}

struct Line {
    id: Option<String>,
    plot_code: Result<PlotCode, String>,
    solved: Option<bool>,
}

fn plot_code_of(v: &Value) -> Result<PlotCode, String> {
    let v = match v {
        Value::String(raw) => extract_json(raw).map_err(|e| e.to_string())?,
        other => other.clone(),
    };
    plotcode_from_value(&v, ParseMode::Lenient).map_err(|e| e.to_string())
}

fn parse_line(text: &str) -> Line {
    let v: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            return Line {
                id: None,
                plot_code: Err(e.to_string()),
                solved: None,
            }
        }
    };
    match v.get("plot_code") {
        Some(pc) => Line {
            id: v.get("id").and_then(Value::as_str).map(str::to_string),
            plot_code: plot_code_of(pc),
            solved: v.get("solved").and_then(Value::as_bool),
        },
        None => Line {
            id: None,
            plot_code: plot_code_of(&v),
            solved: None,
        },
    }
}

fn nonblank(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.trim().is_empty())
}

/// Scores every prediction against its reference.
pub fn evaluate(pred: &str, truth: &str, bins: usize, tol: f64) -> Result<EvalReport, EvalError> {
    let preds: Vec<Line> = nonblank(pred).map(parse_line).collect();
    let truths: Vec<(Option<String>, PlotCode)> = nonblank(truth)
        .map(parse_line)
        .enumerate()
        .map(|(i, l)| {
            l.plot_code
                .map(|pc| (l.id, pc))
                .map_err(|message| EvalError::Truth { line: i + 1, message })
        })
        .collect::<Result<_, _>>()?;

    let by_id = preds.iter().all(|p| p.id.is_some()) && truths.iter().all(|t| t.0.is_some());
    let index: BTreeMap<&str, usize> = truths
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.0.as_deref().map(|id| (id, i)))
        .collect();
    if !by_id && preds.len() != truths.len() {
        return Err(EvalError::CountMismatch {
            pred: preds.len(),
            truth: truths.len(),
        });
    }

    let empty = PlotCode::default();
    let mut samples = Vec::with_capacity(preds.len());
    for (i, p) in preds.iter().enumerate() {
        let (id, t) = if by_id {
            let id = p.id.clone().expect("checked above");
            let j = *index.get(id.as_str()).ok_or_else(|| EvalError::UnknownId(id.clone()))?;
            (id, &truths[j].1)
        } else {
            (p.id.clone().unwrap_or_else(|| i.to_string()), &truths[i].1)
        };
        let (parsed, pc) = match &p.plot_code {
            Ok(pc) => (true, pc),
            Err(_) => (false, &empty),
        };
        samples.push(SampleScore {
            id,
            parsed,
            segments: segment_f1(pc, t),
            annotations: parsed.then(|| annotation_match(&pc.annotations, &t.annotations, tol)),
            solved: p.solved,
        });
    }

    let n = samples.len().max(1) as f64;
    let parsed = samples.iter().filter(|s| s.parsed).count();
    let evaluated: Vec<&AnnotationMatch> = samples.iter().filter_map(|s| s.annotations.as_ref()).collect();
    let fully_correct = evaluated.iter().filter(|a| a.fully_correct).count();
    let bins = if !samples.is_empty() && samples.iter().all(|s| s.solved.is_some()) {
        let scored: Vec<(f64, bool)> = samples
            .iter()
            .map(|s| (s.segments.f1, s.solved.unwrap_or(false)))
            .collect();
        Some(bin_by_score(&scored, bins)?)
    } else {
        None
    };
    Ok(EvalReport {
        parse_rate: parsed as f64 / n,
        mean_f1: samples.iter().map(|s| s.segments.f1).sum::<f64>() / n,
        annotations: AnnotationStats {
            evaluated: evaluated.len(),
            fully_correct,
            fully_correct_rate: if evaluated.is_empty() {
                0.0
            } else {
                fully_correct as f64 / evaluated.len() as f64
            },
        },
        bins,
        samples,
    })
}
