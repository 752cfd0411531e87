//! Rule-based forward chaining over symbolic facts and extraction of proof
//! seeds from the resulting dependency graph.

mod chain;
mod rules;
mod subgoal;
mod text;

pub use chain::{forward_chain, Application, ChainBudget, DeductionGraph, Node};
pub use rules::{load_rule_library, parse_rules, Rule};
pub use subgoal::{
    extract_subgoals, filter_trivial, sample_subgoals, select_seeds, ProofTrace, SeedData, Step,
    DEFINITIONAL_RULES,
};
pub use text::{predicate_text, step_text, translate_seed, SeedText};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeductionError {
    #[error("rule library: {0}")]
    Rules(String),
}

/// Re-checks a trace: starting from its premises alone, every step's inputs
/// must already be known and the rule must yield the step's output on `w`.
pub fn replay_trace(trace: &ProofTrace, rules: &[Rule], w: &crate::geom::Witness) -> bool {
    let mut known = crate::geom::FactStore::new();
    for p in &trace.premises {
        known.insert(p);
    }
    for step in &trace.steps {
        let Some(rule) = rules.iter().find(|r| r.id == step.rule) else {
            return false;
        };
        if !step.inputs.iter().all(|i| known.contains(i)) {
            return false;
        }
        let mut local = crate::geom::FactStore::new();
        for i in &step.inputs {
            local.insert(i);
        }
        let compiled = chain::CompiledRule::new(rule);
        let produced = compiled
            .matches(&local)
            .into_iter()
            .filter(|(b, _)| compiled.checks_hold(b, w))
            .any(|(b, _)| compiled.conclude(&b).contains(&step.output));
        if !produced {
            return false;
        }
        known.insert(&step.output);
    }
    trace.steps.last().is_some_and(|s| s.output == trace.target) || trace.steps.is_empty()
}
