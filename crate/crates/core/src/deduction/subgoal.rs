use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Predicate, PredicateKind, Witness};

use super::DeductionGraph;

/// Rules treated as restating a definition rather than proving something.
pub const DEFINITIONAL_RULES: [&str; 4] = ["r51", "r54", "r55", "r56"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub rule: String,
    pub inputs: Vec<Predicate>,
    pub output: Predicate,
}

/// Derivation of one target from the given facts it depends on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofTrace {
    pub target: Predicate,
    /// Given facts in the target's ancestor cone, sorted.
    pub premises: Vec<Predicate>,
    /// Topologically ordered; the last step outputs `target`.
    pub steps: Vec<Step>,
}

/// A premises / proof / target triple ready for problem writing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedData {
    pub premises: Vec<Predicate>,
    pub steps: Vec<Step>,
    pub targets: Vec<Predicate>,
    pub witness: Witness,
}

/// One trace per derived node, in node order.
pub fn extract_subgoals(g: &DeductionGraph) -> Vec<ProofTrace> {
    (0..g.nodes.len())
        .filter(|&i| !g.nodes[i].is_given())
        .map(|i| trace_of(g, i))
        .collect()
}

fn trace_of(g: &DeductionGraph, target: usize) -> ProofTrace {
    let mut visited = vec![false; g.nodes.len()];
    let mut premises = BTreeSet::new();
    let mut steps = Vec::new();
    // Iterative post-order walk over producing applications.
    let mut stack = vec![(target, false)];
    while let Some((n, expanded)) = stack.pop() {
        match g.nodes[n].producer {
            None => {
                visited[n] = true;
                premises.insert(g.nodes[n].fact.clone());
            }
            Some(a) if expanded => {
                let app = &g.applications[a];
                steps.push(Step {
                    rule: app.rule.clone(),
                    inputs: app.inputs.iter().map(|&i| g.nodes[i].fact.clone()).collect(),
                    output: g.nodes[n].fact.clone(),
                });
            }
            Some(a) => {
                if visited[n] {
                    continue;
                }
                visited[n] = true;
                stack.push((n, true));
                for &i in g.applications[a].inputs.iter().rev() {
                    if !visited[i] {
                        stack.push((i, false));
                    }
                }
            }
        }
    }
    ProofTrace {
        target: g.nodes[target].fact.clone(),
        premises: premises.into_iter().collect(),
        steps,
    }
}

/// Drops traces whose target restates a premise or only unfolds definitions.
pub fn filter_trivial(subgoals: Vec<ProofTrace>, definitional: &[&str]) -> Vec<ProofTrace> {
    subgoals
        .into_iter()
        .filter(|t| {
            let target = t.target.canonicalize();
            let restates = t.premises.iter().any(|p| restates(p, &target));
            let only_defs = t.steps.iter().all(|s| definitional.contains(&s.rule.as_str()));
            !t.steps.is_empty() && !restates && !only_defs
        })
        .collect()
}

fn restates(premise: &Predicate, target: &Predicate) -> bool {
    if premise.kind() == PredicateKind::Cyclic && target.kind() == PredicateKind::Cyclic {
        let pts: BTreeSet<_> = premise.args().iter().collect();
        return target.args().iter().all(|a| pts.contains(a));
    }
    premise.canonicalize() == *target
}

/// Uniform sample of at most `m` traces, keeping their original order.
pub fn sample_subgoals<R: Rng + ?Sized>(subgoals: Vec<ProofTrace>, m: usize, rng: &mut R) -> Vec<ProofTrace> {
    if subgoals.len() <= m {
        return subgoals;
    }
    let mut picked = index::sample(rng, subgoals.len(), m).into_vec();
    picked.sort_unstable();
    let mut slots: Vec<Option<ProofTrace>> = subgoals.into_iter().map(Some).collect();
    picked.into_iter().filter_map(|i| slots[i].take()).collect()
}

/// Keeps traces in the top `ceil(rho * n)` by premise count and also by step
/// count; ties go to the smaller canonical target. Output follows the
/// premise-count ranking.
pub fn select_seeds(subgoals: &[ProofTrace], rho: f64, w: &Witness) -> Vec<SeedData> {
    let n = subgoals.len();
    if n == 0 || !(rho > 0.0 && rho <= 1.0) {
        return Vec::new();
    }
    let k = ((rho * n as f64).ceil() as usize).clamp(1, n);
    let targets: Vec<Predicate> = subgoals.iter().map(|t| t.target.canonicalize()).collect();
    let ranked = |key: &dyn Fn(&ProofTrace) -> usize| {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            key(&subgoals[b])
                .cmp(&key(&subgoals[a]))
                .then_with(|| targets[a].cmp(&targets[b]))
                .then(a.cmp(&b))
        });
        order.truncate(k);
        order
    };
    let by_premises = ranked(&|t| t.premises.len());
    let by_steps: BTreeSet<usize> = ranked(&|t| t.steps.len()).into_iter().collect();
    by_premises
        .into_iter()
        .filter(|i| by_steps.contains(i))
        .map(|i| {
            let t = &subgoals[i];
            SeedData {
                premises: t.premises.clone(),
                steps: t.steps.clone(),
                targets: vec![t.target.clone()],
                witness: w.clone(),
            }
        })
        .collect()
}

