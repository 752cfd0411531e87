use std::collections::BTreeMap;

use geoforge_core::deduction::{
    extract_subgoals, filter_trivial, forward_chain, sample_subgoals, select_seeds, translate_seed, Rule, SeedData,
    SeedText, DEFINITIONAL_RULES,
};
use geoforge_core::geom::{sample_scene, Predicate, PredicateKind};
use geoforge_core::verify::ProblemKind;
use geoforge_gateway::{vars, Role};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::PipelineConfig;

/// One seed on its way through instantiation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub id: String,
    pub scene: usize,
    pub seed: SeedData,
    pub text: SeedText,
    pub kind: ProblemKind,
}

impl Attempt {
    pub fn target(&self) -> &Predicate {
        &self.seed.targets[0]
    }
}

/// Ratio targets ask for a value; every other relation is proved.
pub fn route(target: &Predicate) -> ProblemKind {
    match target.kind() {
        PredicateKind::Rconst | PredicateKind::Eqratio | PredicateKind::Eqratio3 => ProblemKind::Computation,
        _ => ProblemKind::Proof,
    }
}

/// RNG seeds of the `n` scenes of a run.
pub fn scene_seeds(rng_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Samples, deduces and selects seeds for scene `index`. `None` when the
/// sampler gives up on the scene.
pub fn seeds_for_scene(cfg: &PipelineConfig, rules: &[Rule], index: usize, scene_seed: u64) -> Option<Vec<SeedData>> {
    let scene = sample_scene(scene_seed, &cfg.sample).ok()?;
    let graph = forward_chain(&scene.facts, &scene.witness, rules, cfg.chain);
    let subgoals = filter_trivial(extract_subgoals(&graph), &DEFINITIONAL_RULES);
    let mut rng = ChaCha8Rng::seed_from_u64(scene_seed ^ index as u64);
    let kept = sample_subgoals(subgoals, cfg.subgoal_budget, &mut rng);
    Some(select_seeds(&kept, cfg.rho, &scene.witness))
}

/// Attempts of a run in scene order, and how many scenes were sampled.
pub fn generate_attempts(cfg: &PipelineConfig, rules: &[Rule]) -> (Vec<Attempt>, usize) {
    let seeds = scene_seeds(cfg.rng_seed, cfg.scenes);
    let per_scene: Vec<Option<Vec<SeedData>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| seeds_for_scene(cfg, rules, i, s))
        .collect();
    let sampled = per_scene.iter().filter(|s| s.is_some()).count();
    let mut attempts = Vec::new();
    for (scene, seeds) in per_scene.into_iter().enumerate() {
        for (k, seed) in seeds.into_iter().flatten().enumerate() {
            let text = translate_seed(&seed, rules);
            let kind = route(&seed.targets[0]);
            attempts.push(Attempt {
                id: format!("{scene:05}-{k:02}"),
                scene,
                seed,
                text,
                kind,
            });
        }
    }
    if let Some(max) = cfg.max_attempts {
        attempts.truncate(max);
    }
    (attempts, sampled)
}

/// Role and variables of the problem-writing request for an attempt.
pub fn instructor_request(a: &Attempt) -> (Role, BTreeMap<String, String>) {
    let role = match a.kind {
        ProblemKind::Computation => Role::InstructorComputation,
        ProblemKind::Proof => Role::InstructorProof,
    };
    let aux = if a.text.step_texts.is_empty() {
        String::new()
    } else {
        let steps: Vec<String> = a
            .text
            .step_texts
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Step{}: {s}", i + 1))
            .collect();
        format!("<derivation>\n{}\n</derivation>", steps.join("\n"))
    };
    (
        role,
        vars([
            ("problem", a.text.premise_text.as_str()),
            ("conclusion", a.text.target_text.as_str()),
            ("aux_section", aux.as_str()),
        ]),
    )
}

pub fn coder_vars(question: &str) -> BTreeMap<String, String> {
    vars([("question", question)])
}
