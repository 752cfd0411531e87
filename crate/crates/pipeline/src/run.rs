use geoforge_core::deduction::{load_rule_library, Rule, Step};
use geoforge_core::geom::Predicate;
use geoforge_core::render::{quality_check, render_svg, QualityReport};
use geoforge_core::schema::{plotcode_from_value, PlotCode};
use geoforge_core::verify::{verify_record, CandidateRecord, ProblemKind, Stage, VerificationReport};
use geoforge_gateway::{extract_json, string_field, Gateway};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attempt::{coder_vars, generate_attempts, instructor_request, Attempt};
use crate::debias::debias;
use crate::{PipelineConfig, PipelineError};

/// Per-stage counters of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub sampled: usize,
    pub seed_selected: usize,
    pub semantic_rejected: usize,
    pub geometric_rejected: usize,
    pub plotting_rejected: usize,
    pub image_rejected: usize,
    pub retained: usize,
}

impl StageStats {
    pub fn rejected(&self) -> usize {
        self.semantic_rejected + self.geometric_rejected + self.plotting_rejected + self.image_rejected
    }

    /// Every instantiation attempt ends in exactly one bucket.
    pub fn identity_holds(&self) -> bool {
        self.rejected() + self.retained == self.seed_selected
    }

    fn count(&mut self, stage: Stage) {
        match stage {
            Stage::Semantic => self.semantic_rejected += 1,
            Stage::Geometric => self.geometric_rejected += 1,
            Stage::Plotting => self.plotting_rejected += 1,
            Stage::Image => self.image_rejected += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub premises: Vec<Predicate>,
    pub steps: Vec<Step>,
    pub targets: Vec<Predicate>,
    pub rules: Vec<String>,
}

/// Model outputs exactly as received.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTexts {
    pub instructor: String,
    pub judge: Option<String>,
    pub coder: String,
    pub debias_step1: String,
    pub debias_step2: Option<String>,
    pub cot_rewrite: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub kind: ProblemKind,
    pub question: String,
    pub question_debiased: String,
    pub cot: String,
    pub cot_debiased: String,
    pub answer: String,
    pub plot_code: PlotCode,
    /// Relative to the output directory.
    pub diagram: String,
    pub seed: SeedProvenance,
    /// Relations the question asserts, checked on the plot-code coordinates.
    pub declared: Vec<Predicate>,
    pub judge_reason: Option<String>,
    pub verification: VerificationReport,
    pub quality: QualityReport,
    pub debias_flags: Vec<String>,
    pub raw: RawTexts,
}

impl DatasetRecord {
    /// What the verifier needs, taken from the record alone.
    pub fn candidate(&self) -> CandidateRecord {
        CandidateRecord {
            plot_code: self.plot_code.clone(),
            declared: self.declared.clone(),
            answer: (self.kind == ProblemKind::Computation).then(|| self.answer.clone()),
            kind: self.kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub stage: Stage,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Retained {
    pub record: DatasetRecord,
    pub svg: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Retained(Box<Retained>),
    Rejected(Rejection),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub retained: Vec<Retained>,
    pub rejections: Vec<Rejection>,
    pub stats: StageStats,
}

struct Instructed {
    question: String,
    cot: String,
    answer: String,
}

fn reject(a: &Attempt, stage: Stage, reason: impl Into<String>) -> Outcome {
    Outcome::Rejected(Rejection {
        id: a.id.clone(),
        stage,
        reason: reason.into(),
    })
}

/// Runs one attempt through the gates in order: semantic check, plot-code
/// parsing, geometric verification, rendering and layout quality, then
/// debiasing.
pub fn process_attempt(a: &Attempt, gw: &Gateway, cfg: &PipelineConfig) -> Outcome {
    let (role, v) = instructor_request(a);
    let (raw_instructor, inst) = match gw.complete_json(role, &v) {
        Ok((raw, value)) => {
            let field = |k| string_field(&value, k);
            match (field("question"), field("cot"), field("answer")) {
                (Some(question), Some(cot), Some(answer)) => (raw, Instructed { question, cot, answer }),
                _ => return reject(a, Stage::Semantic, "instructor: missing question, cot or answer"),
            }
        }
        Err(e) => return reject(a, Stage::Semantic, format!("instructor: {e}")),
    };

    let (raw_judge, judge_reason) = if cfg.gates.semantic {
        match gw.judge_raw(&inst.question, &inst.cot, &inst.answer) {
            Ok((raw, v)) if v.passed => (Some(raw), Some(v.reason)),
            Ok((_, v)) => return reject(a, Stage::Semantic, format!("judge: {}", v.reason)),
            Err(e) => return reject(a, Stage::Semantic, format!("judge: {e}")),
        }
    } else {
        (None, None)
    };

    let raw_coder = match gw.complete(geoforge_gateway::Role::CoderPlotcode, &coder_vars(&inst.question)) {
        Ok(t) => t,
        Err(e) => return reject(a, Stage::Plotting, format!("coder: {e}")),
    };
    let pc = match extract_json(&raw_coder)
        .map_err(|e| e.to_string())
        .and_then(|v| plotcode_from_value(&v, cfg.schema_mode).map_err(|e| e.to_string()))
        .and_then(|pc| pc.validate().map(|_| pc).map_err(|e| e.to_string()))
        .and_then(|pc| pc.resolve_circles().map(|_| pc).map_err(|e| e.to_string()))
    {
        Ok(pc) => pc,
        Err(e) => return reject(a, Stage::Plotting, format!("plot code: {e}")),
    };

    let declared: Vec<Predicate> = a.seed.premises.iter().chain(&a.seed.targets).cloned().collect();
    let candidate = CandidateRecord {
        plot_code: pc.clone(),
        declared: declared.clone(),
        answer: (a.kind == ProblemKind::Computation).then(|| inst.answer.clone()),
        kind: a.kind,
    };
    let verification = verify_record(&candidate, &cfg.tolerance);
    if !verification.passed && cfg.gates.geometric {
        let failed: Vec<String> = verification.failures().map(|c| c.subject.clone()).collect();
        return reject(a, Stage::Geometric, format!("failed checks: {}", failed.join("; ")));
    }

    let svg = match render_svg(&pc, &cfg.style) {
        Ok(svg) => svg,
        Err(e) => return reject(a, Stage::Image, format!("render: {e}")),
    };
    let quality = quality_check(&pc, &cfg.style);
    if !quality.passed && cfg.gates.image {
        return reject(a, Stage::Image, quality.reasons.join("; "));
    }

    let deb = match debias(&inst.question, &inst.cot, &pc, gw) {
        Ok(d) => d,
        Err(e) => return reject(a, Stage::Semantic, format!("debias: {e}")),
    };

    let record = DatasetRecord {
        id: a.id.clone(),
        kind: a.kind,
        question: inst.question,
        question_debiased: deb.question,
        cot: inst.cot,
        cot_debiased: deb.cot,
        answer: inst.answer,
        plot_code: pc,
        diagram: format!("diagrams/{}.svg", a.id),
        seed: SeedProvenance {
            premises: a.seed.premises.clone(),
            steps: a.seed.steps.clone(),
            targets: a.seed.targets.clone(),
            rules: a.seed.steps.iter().map(|s| s.rule.clone()).collect(),
        },
        declared,
        judge_reason,
        verification,
        quality,
        debias_flags: deb.flags,
        raw: RawTexts {
            instructor: raw_instructor,
            judge: raw_judge,
            coder: raw_coder,
            debias_step1: deb.raw_step1,
            debias_step2: deb.raw_step2,
            cot_rewrite: deb.raw_cot,
        },
    };
    Outcome::Retained(Box::new(Retained { record, svg }))
}

/// Processes attempts in parallel and tallies outcomes in attempt order.
pub fn run_attempts(attempts: &[Attempt], sampled: usize, gw: &Gateway, cfg: &PipelineConfig) -> RunOutput {
    let outcomes: Vec<Outcome> = attempts.par_iter().map(|a| process_attempt(a, gw, cfg)).collect();
    let mut out = RunOutput {
        stats: StageStats {
            sampled,
            seed_selected: attempts.len(),
            ..StageStats::default()
        },
        ..RunOutput::default()
    };
    for o in outcomes {
        match o {
            Outcome::Retained(r) => {
                out.stats.retained += 1;
                out.retained.push(*r);
            }
            Outcome::Rejected(r) => {
                out.stats.count(r.stage);
                out.rejections.push(r);
            }
        }
    }
    assert!(out.stats.identity_holds(), "stage accounting broken: {:?}", out.stats);
    out
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    if threads == 0 {
        return Ok(f());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(|pool| pool.install(f))
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))
}

/// Seeds, instantiates and filters with the given gateway.
pub fn run_with(cfg: &PipelineConfig, gw: &Gateway) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let rules = load_rule_library().map_err(|e| PipelineError::Config(e.to_string()))?;
    with_threads(cfg.threads, || {
        let (attempts, sampled) = generate_attempts(cfg, &rules);
        run_attempts(&attempts, sampled, gw, cfg)
    })
}

/// [`run_with`] using the gateway described by the config.
pub fn run(cfg: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    let gw = Gateway::from_config(cfg.gateway.clone())?;
    run_with(cfg, &gw)
}

/// Attempts of a config, as [`run_with`] would generate them.
pub fn plan(cfg: &PipelineConfig) -> Result<(Vec<Attempt>, usize, Vec<Rule>), PipelineError> {
    cfg.validate()?;
    let rules = load_rule_library().map_err(|e| PipelineError::Config(e.to_string()))?;
    let (attempts, sampled) = with_threads(cfg.threads, || generate_attempts(cfg, &rules))?;
    Ok((attempts, sampled, rules))
}
