use serde::{Deserialize, Serialize};

use crate::geom::{Predicate, PredicateKind};

use super::{Rule, SeedData, Step};

/// English rendering of a seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedText {
    /// Premise sentences joined by "; ".
    pub premise_text: String,
    pub premises: Vec<String>,
    pub step_texts: Vec<String>,
    pub target_text: String,
}

/// Fixed per-kind sentence for a predicate.
pub fn predicate_text(p: &Predicate) -> String {
    use PredicateKind::*;
    let a: Vec<&str> = p.args().iter().map(|l| l.as_str()).collect();
    let seg = |i: usize| format!("{}{}", a[i], a[i + 1]);
    let tri = |i: usize| format!("{}{}{}", a[i], a[i + 1], a[i + 2]);
    let list = |xs: &[&str]| xs.join(", ");
    match p.kind() {
        Perp => format!("{} ⊥ {}", seg(0), seg(2)),
        Para => format!("{} ∥ {}", seg(0), seg(2)),
        Npara => format!("{} ∦ {}", seg(0), seg(2)),
        Cong => format!("{} = {}", seg(0), seg(2)),
        Coll => format!("{} are collinear", list(&a)),
        Ncoll => format!("{} are not collinear", list(&a)),
        Cyclic => format!("{} are concyclic", list(&a)),
        Circle => format!("{} is the center of the circle through {}", a[0], list(&a[1..])),
        Midp => format!("{} is the midpoint of {}", a[0], seg(1)),
        Eqangle => format!("∠({},{}) = ∠({},{})", seg(0), seg(2), seg(4), seg(6)),
        Eqratio => format!("{}:{} = {}:{}", seg(0), seg(2), seg(4), seg(6)),
        Eqratio3 => format!(
            "{}{}:{}{} = {}{}:{}{}",
            a[4], a[0], a[4], a[2], a[5], a[1], a[5], a[3]
        ),
        Rconst => {
            let r = p.ratio().expect("rconst carries a ratio");
            format!("{}:{} = {}/{}", seg(0), seg(2), r.numer(), r.denom())
        }
        Simtri => format!("△{} ∼ △{}", tri(0), tri(3)),
        Simtrir => format!("△{} ∼ △{} (opposite orientation)", tri(0), tri(3)),
        Contri => format!("△{} ≅ △{}", tri(0), tri(3)),
        Contrir => format!("△{} ≅ △{} (opposite orientation)", tri(0), tri(3)),
        Sameclock => format!("△{} and △{} have the same orientation", tri(0), tri(3)),
        Sameside => format!(
            "{} is on the same side of {}{} as {} is of {}{}",
            a[0], a[1], a[2], a[3], a[4], a[5]
        ),
        Nsameside => format!(
            "{} is not on the same side of {}{} as {} is of {}{}",
            a[0], a[1], a[2], a[3], a[4], a[5]
        ),
    }
}

/// `by <rule name>, <inputs joined by " and "> give <output>`.
pub fn step_text(step: &Step, rules: &[Rule]) -> String {
    let name = rules
        .iter()
        .find(|r| r.id == step.rule)
        .map_or(step.rule.as_str(), |r| r.name.as_str());
    let inputs: Vec<String> = step.inputs.iter().map(predicate_text).collect();
    format!("by {name}, {} give {}", inputs.join(" and "), predicate_text(&step.output))
}

pub fn translate_seed(seed: &SeedData, rules: &[Rule]) -> SeedText {
    let premises: Vec<String> = seed.premises.iter().map(predicate_text).collect();
    SeedText {
        premise_text: premises.join("; "),
        premises,
        step_texts: seed.steps.iter().map(|s| step_text(s, rules)).collect(),
        target_text: seed
            .targets
            .iter()
            .map(predicate_text)
            .collect::<Vec<_>>()
            .join("; "),
    }
}
