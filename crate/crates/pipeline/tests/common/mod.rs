#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use geoforge::script::{script_attempt, script_transcript, Corruption};
use geoforge::{plan, run_attempts, Attempt, PipelineConfig, RunOutput};
use geoforge_gateway::{Gateway, GatewayConfig, MockBackend, TranscriptEntry};

pub fn small_config(rng_seed: u64, scenes: usize) -> PipelineConfig {
    PipelineConfig {
        rng_seed,
        scenes,
        ..PipelineConfig::default()
    }
}

pub fn mock_gateway(entries: Vec<TranscriptEntry>) -> Gateway {
    Gateway::with_backend(GatewayConfig::default(), Box::new(MockBackend::new(entries).unwrap()))
}

pub fn run_scripted(cfg: &PipelineConfig, attempts: &[Attempt], corruptions: &BTreeMap<String, Corruption>) -> RunOutput {
    let gw = mock_gateway(script_transcript(attempts, corruptions));
    run_attempts(attempts, attempts.len(), &gw, cfg)
}

/// `n` attempts whose clean scripted run is retained and whose prompts are
/// not shared with one another, so a corruption on one cannot leak into
/// another.
pub fn clean_corpus(cfg: &PipelineConfig, n: usize) -> Vec<Attempt> {
    let (attempts, _, _) = plan(cfg).unwrap();
    let clean = run_scripted(cfg, &attempts, &BTreeMap::new());
    let retained: BTreeSet<&str> = clean.retained.iter().map(|r| r.record.id.as_str()).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for a in attempts.iter().filter(|a| retained.contains(a.id.as_str())) {
        let hashes: Vec<String> = script_attempt(a, None).into_iter().map(|e| e.prompt_hash).collect();
        if hashes.iter().any(|h| seen.contains(h)) {
            continue;
        }
        seen.extend(hashes);
        out.push(a.clone());
        if out.len() == n {
            return out;
        }
    }
    panic!("only {} isolated clean attempts available, wanted {n}", out.len());
}
