//! Structural agreement between predicted and reference plot code.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dsl::{parse_value_literal, LiteralContext};
use crate::geom::PointLabel;
use crate::schema::{Annotations, PlotCode, Segment};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub intersection: usize,
    pub predicted: usize,
    pub truth: usize,
}

impl F1Report {
    /// Precision and recall are 0 when their denominator set is empty.
    pub fn from_counts(intersection: usize, predicted: usize, truth: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(intersection, predicted);
        let recall = ratio(intersection, truth);
        // 2PR/(P+R) reduced to counts, so a single rounding step.
        let f1 = if intersection > 0 {
            2.0 * intersection as f64 / (predicted + truth) as f64
        } else {
            0.0
        };
        F1Report {
            precision,
            recall,
            f1,
            intersection,
            predicted,
            truth,
        }
    }
}

/// Precision/recall/F1 over unordered segment endpoint pairs.
pub fn segment_f1(pred: &PlotCode, truth: &PlotCode) -> F1Report {
    segment_set_f1(&pred.segments, &truth.segments)
}

pub fn segment_set_f1(pred: &BTreeSet<Segment>, truth: &BTreeSet<Segment>) -> F1Report {
    F1Report::from_counts(pred.intersection(truth).count(), pred.len(), truth.len())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BinningError {
    #[error("cannot split {n} samples into {k} bins")]
    TooFewSamples { n: usize, k: usize },
    #[error("bin count must be at least 1")]
    ZeroBins,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub index: usize,
    pub size: usize,
    pub min_score: f64,
    pub max_score: f64,
    pub accuracy: f64,
}

/// Sorts by score (ties by input position) and cuts into `k` contiguous bins
/// of `n / k` samples; the remainder goes one each to the last bins.
pub fn bin_by_score(samples: &[(f64, bool)], k: usize) -> Result<Vec<Bin>, BinningError> {
    let n = samples.len();
    if k == 0 {
        return Err(BinningError::ZeroBins);
    }
    if k > n {
        return Err(BinningError::TooFewSamples { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].0.total_cmp(&samples[b].0).then(a.cmp(&b)));
    let (base, extra) = (n / k, n % k);
    let mut bins = Vec::with_capacity(k);
    let mut start = 0;
    for index in 0..k {
        let size = base + usize::from(index >= k - extra);
        let members = &order[start..start + size];
        let solved = members.iter().filter(|&&i| samples[i].1).count();
        bins.push(Bin {
            index,
            size,
            min_score: samples[members[0]].0,
            max_score: samples[members[size - 1]].0,
            accuracy: solved as f64 / size as f64,
        });
        start += size;
    }
    Ok(bins)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMatch {
    pub matched: usize,
    pub missing: usize,
    pub spurious: usize,
}

impl CategoryMatch {
    pub fn is_exact(&self) -> bool {
        self.missing == 0 && self.spurious == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationMatch {
    pub fully_correct: bool,
    pub right_angles: CategoryMatch,
    pub lengths: CategoryMatch,
    pub angles: CategoryMatch,
}

/// Greedy one-to-one matching in truth order; `same` decides equivalence.
fn match_entries<T>(truth: &[T], pred: &[T], same: impl Fn(&T, &T) -> bool) -> CategoryMatch {
    let mut used = vec![false; pred.len()];
    let mut matched = 0;
    for t in truth {
        if let Some(j) = (0..pred.len()).find(|&j| !used[j] && same(t, &pred[j])) {
            used[j] = true;
            matched += 1;
        }
    }
    CategoryMatch {
        matched,
        missing: truth.len() - matched,
        spurious: pred.len() - matched,
    }
}

fn same_angle(a: &[PointLabel; 3], b: &[PointLabel; 3]) -> bool {
    a == b || (a[1] == b[1] && a[0] == b[2] && a[2] == b[0])
}

fn same_segment(a: &[PointLabel; 2], b: &[PointLabel; 2]) -> bool {
    a == b || (a[0] == b[1] && a[1] == b[0])
}

fn same_value(a: &str, b: &str, ctx: LiteralContext, tol: f64) -> bool {
    match (parse_value_literal(a, ctx), parse_value_literal(b, ctx)) {
        (Ok(x), Ok(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}

/// Entry-by-entry comparison; ∠ABC and ∠CBA count as the same angle.
pub fn annotation_match(pred: &Annotations, truth: &Annotations, tol: f64) -> AnnotationMatch {
    let right_angles = match_entries(&truth.right_angles, &pred.right_angles, same_angle);
    let lengths = match_entries(&truth.length_of_line, &pred.length_of_line, |t, p| {
        same_segment(&t.0, &p.0) && same_value(&t.1, &p.1, LiteralContext::Length, tol)
    });
    let angles = match_entries(&truth.measure_of_angle, &pred.measure_of_angle, |t, p| {
        same_angle(&t.0, &p.0) && same_value(&t.1, &p.1, LiteralContext::Angle, tol)
    });
    AnnotationMatch {
        fully_correct: right_angles.is_exact() && lengths.is_exact() && angles.is_exact(),
        right_angles,
        lengths,
        angles,
    }
}
