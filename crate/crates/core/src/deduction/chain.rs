use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geom::{
    check_nondegenerate, Binding, CompiledPattern, FactStore, Predicate, PredicateKind, Support, Witness,
};

use super::Rule;

/// Stopping bounds for [`forward_chain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainBudget {
    pub max_facts: usize,
    pub max_rounds: usize,
}

impl Default for ChainBudget {
    fn default() -> Self {
        ChainBudget {
            max_facts: 2000,
            max_rounds: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub fact: Predicate,
    /// Index into [`DeductionGraph::applications`]; `None` for given facts.
    pub producer: Option<usize>,
}

impl Node {
    pub fn is_given(&self) -> bool {
        self.producer.is_none()
    }
}

/// One rule firing: `inputs` (node indices) yield node `output`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Application {
    pub rule: String,
    pub inputs: Vec<usize>,
    pub output: usize,
}

/// Facts reached by forward chaining, with the first derivation of each.
///
/// Nodes are in insertion order, so every application's inputs precede its
/// output.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeductionGraph {
    pub nodes: Vec<Node>,
    pub applications: Vec<Application>,
    pub rounds: usize,
    pub truncated: bool,
}

impl DeductionGraph {
    pub fn given(&self) -> impl Iterator<Item = &Predicate> {
        self.nodes.iter().filter(|n| n.is_given()).map(|n| &n.fact)
    }

    pub fn derived(&self) -> impl Iterator<Item = &Predicate> {
        self.nodes.iter().filter(|n| !n.is_given()).map(|n| &n.fact)
    }

    pub fn node_of(&self, fact: &Predicate) -> Option<usize> {
        let c = fact.canonicalize();
        self.nodes.iter().position(|n| n.fact == c)
    }
}

pub(crate) struct CompiledRule<'a> {
    pub rule: &'a Rule,
    pub positive: Vec<CompiledPattern>,
    pub checks: Vec<CompiledPattern>,
    pub conclusions: Vec<CompiledPattern>,
    pub nvars: usize,
}

impl<'a> CompiledRule<'a> {
    pub fn new(rule: &'a Rule) -> Self {
        let mut vars = Vec::new();
        let positive = rule
            .positive_premises()
            .map(|p| CompiledPattern::compile(p, &mut vars))
            .collect();
        let checks = rule.check_premises().map(|p| CompiledPattern::compile(p, &mut vars)).collect();
        let conclusions = rule.conclusions.iter().map(|p| CompiledPattern::compile(p, &mut vars)).collect();
        CompiledRule {
            rule,
            positive,
            checks,
            conclusions,
            nvars: vars.len(),
        }
    }

    /// Every full binding of the fact premises, with the supporting items,
    /// sorted by binding.
    pub fn matches(&self, store: &FactStore) -> Vec<(Binding, Vec<Support>)> {
        self.matches_since(store, 0)
    }

    /// Bindings that use at least one fact newer than generation `since`.
    ///
    /// Each premise in turn is matched against new facts only and the rest
    /// of the join runs over everything.
    pub fn matches_since(&self, store: &FactStore, since: u32) -> Vec<(Binding, Vec<Support>)> {
        let mut out = Vec::new();
        let mut done = vec![false; self.positive.len()];
        let mut support = Vec::with_capacity(self.positive.len());
        let empty = vec![None; self.nvars];
        if since == 0 {
            self.join(store, &empty, &mut done, &mut support, &mut out);
        } else {
            for first in 0..self.positive.len() {
                let mut found = Vec::new();
                store.match_compiled(&self.positive[first], &empty, since, &mut found);
                done[first] = true;
                for (b, s) in found {
                    support.push(s);
                    self.join(store, &b, &mut done, &mut support, &mut out);
                    support.pop();
                }
                done[first] = false;
            }
        }
        out.sort();
        out.dedup_by(|a, b| a.0 == b.0);
        out
    }

    fn join(
        &self,
        store: &FactStore,
        binding: &Binding,
        done: &mut [bool],
        support: &mut Vec<Support>,
        out: &mut Vec<(Binding, Vec<Support>)>,
    ) {
        let Some(next) = self.pick_next(binding, done) else {
            let mut s = support.clone();
            s.sort();
            s.dedup();
            out.push((binding.clone(), s));
            return;
        };
        let mut found = Vec::new();
        store.match_compiled(&self.positive[next], binding, 0, &mut found);
        if found.is_empty() {
            return;
        }
        done[next] = true;
        for (b, s) in found {
            support.push(s);
            self.join(store, &b, done, support, out);
            support.pop();
        }
        done[next] = false;
    }

    /// Most-constrained remaining premise; cyclic patterns last among equals
    /// since they enumerate point permutations.
    fn pick_next(&self, binding: &Binding, done: &[bool]) -> Option<usize> {
        (0..self.positive.len()).filter(|&i| !done[i]).min_by_key(|&i| {
            let p = &self.positive[i];
            let unbound = p
                .terms
                .iter()
                .filter(|t| matches!(t, crate::geom::CTerm::Var(v) if binding[*v].is_none()))
                .count();
            (unbound, p.kind == PredicateKind::Cyclic, i)
        })
    }

    pub fn checks_hold(&self, binding: &Binding, w: &Witness) -> bool {
        self.checks.iter().all(|c| {
            let Some(args) = c.instantiate(binding) else {
                return false;
            };
            match Predicate::new(c.kind, args, c.ratio) {
                Ok(p) => check_nondegenerate(w, &p).unwrap_or(false),
                Err(_) => false,
            }
        })
    }

    pub fn conclude(&self, binding: &Binding) -> Vec<Predicate> {
        self.conclusions
            .iter()
            .filter_map(|c| {
                let args = c.instantiate(binding)?;
                let p = Predicate::new(c.kind, args, c.ratio).ok()?.canonicalize();
                (!p.is_trivial()).then_some(p)
            })
            .collect()
    }
}

/// Applies `rules` to `given` until nothing new is derived or the budget
/// runs out.
///
/// Check premises (ncoll, npara, sameclock, sameside, nsameside) are decided
/// on the witness instead of being looked up. Rules fire in library order;
/// facts derived by one rule are visible to later rules of the same round.
pub fn forward_chain(given: &[Predicate], w: &Witness, rules: &[Rule], budget: ChainBudget) -> DeductionGraph {
    let compiled: Vec<CompiledRule> = rules.iter().map(CompiledRule::new).collect();
    let mut store = FactStore::new();
    let mut graph = DeductionGraph::default();
    let mut node_ix: HashMap<Predicate, usize> = HashMap::new();

    let mut sorted: Vec<Predicate> = given.iter().map(Predicate::canonicalize).collect();
    sorted.sort();
    sorted.dedup();
    for p in sorted {
        if graph.nodes.len() >= budget.max_facts {
            graph.truncated = true;
            return graph;
        }
        if store.insert(&p) {
            node_ix.insert(p.clone(), graph.nodes.len());
            graph.nodes.push(Node {
                fact: p,
                producer: None,
            });
        }
    }

    // Store generation at the start of each rule's previous run.
    let mut last_run = vec![0u32; compiled.len()];
    let mut changed = true;
    while changed {
        if graph.rounds == budget.max_rounds {
            graph.truncated = true;
            break;
        }
        graph.rounds += 1;
        changed = false;
        for (ri, rule) in compiled.iter().enumerate() {
            let since = last_run[ri];
            last_run[ri] = store.generation();
            let mut fresh: Vec<(Predicate, Vec<usize>)> = Vec::new();
            let mut seen: BTreeSet<Predicate> = BTreeSet::new();
            for (binding, support) in rule.matches_since(&store, since) {
                let conclusions: Vec<Predicate> = rule
                    .conclude(&binding)
                    .into_iter()
                    .filter(|c| !store.contains(c) && !seen.contains(c))
                    .collect();
                if conclusions.is_empty() || !rule.checks_hold(&binding, w) {
                    continue;
                }
                let mut inputs: Vec<usize> = support
                    .iter()
                    .flat_map(|s| store.support_facts(*s))
                    .filter_map(|f| node_ix.get(&f).copied())
                    .collect();
                inputs.sort_unstable();
                inputs.dedup();
                for c in conclusions {
                    seen.insert(c.clone());
                    fresh.push((c, inputs.clone()));
                }
            }
            for (fact, inputs) in fresh {
                if graph.nodes.len() >= budget.max_facts {
                    graph.truncated = true;
                    return graph;
                }
                if !store.insert(&fact) {
                    continue;
                }
                changed = true;
                let output = graph.nodes.len();
                node_ix.insert(fact.clone(), output);
                graph.nodes.push(Node {
                    fact,
                    producer: Some(graph.applications.len()),
                });
                graph.applications.push(Application {
                    rule: rule.rule.id.clone(),
                    inputs,
                    output,
                });
            }
        }
    }
    graph
}
