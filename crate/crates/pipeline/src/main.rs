use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use geoforge::eval::evaluate;
use geoforge::script::script_transcript;
use geoforge::{persist, plan, run_with, svg_to_png, DatasetRecord, PipelineConfig, RunOutput};
use geoforge_core::render::{render_svg, RenderStyle};
use geoforge_core::schema::{parse_plotcode, ParseMode, PlotCode};
use geoforge_core::verify::{verify_record, CandidateRecord, ToleranceConfig};
use geoforge_gateway::{transcript_to_jsonl, BackendKind, Gateway, MockBackend};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "geoforge", version, about = "Synthesize verified plane-geometry problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample scenes and write selected seeds as JSONL.
    Seed {
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        #[arg(long, default_value_t = 0.2)]
        rho: f64,
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        /// Subgoals kept per scene before selection.
        #[arg(long, default_value_t = 64)]
        subgoals: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a record's constraints, annotations and answer.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Draw a record's plot code as SVG.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a PNG next to the SVG.
        #[arg(long)]
        png: bool,
    },
    /// Score predicted plot code against references.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    Pipeline {
        #[command(subcommand)]
        cmd: PipelineCmd,
    },
    Gateway {
        #[command(subcommand)]
        cmd: GatewayCmd,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Run every stage and write the dataset to the configured output dir.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Answer model requests with the built-in scripted responses.
        #[arg(long)]
        scripted: bool,
    },
}

#[derive(Subcommand)]
enum GatewayCmd {
    /// Run against the HTTP endpoint and save every exchange.
    Record {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Run against a saved transcript.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Write the scripted responses for a config as a transcript.
    Script {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        transcript: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A dataset record, a verifier candidate, or bare plot code.
fn candidate_of(v: Value) -> Result<CandidateRecord> {
    if let Ok(r) = serde_json::from_value::<DatasetRecord>(v.clone()) {
        return Ok(r.candidate());
    }
    serde_json::from_value::<CandidateRecord>(v).context("expected a dataset record or a candidate record")
}

fn plot_code_of(v: Value) -> Result<PlotCode> {
    match v.get("plot_code") {
        Some(_) => Ok(candidate_of(v)?.plot_code),
        None => Ok(parse_plotcode(v.to_string().as_bytes(), ParseMode::Lenient)?),
    }
}

fn report(cfg: &PipelineConfig, out: &RunOutput) -> Result<()> {
    let manifest = persist(out, &cfg.output_dir)?;
    println!("{}", serde_json::to_string_pretty(&manifest.stats)?);
    eprintln!("wrote {} files to {}", manifest.files.len() + 1, cfg.output_dir.display());
    Ok(())
}

fn scripted_gateway(cfg: &PipelineConfig) -> Result<(Gateway, String)> {
    let (attempts, _, _) = plan(cfg)?;
    let entries = script_transcript(&attempts, &BTreeMap::new());
    let jsonl = transcript_to_jsonl(&entries);
    let backend = MockBackend::new(entries)?;
    Ok((Gateway::with_backend(cfg.gateway.clone(), Box::new(backend)), jsonl))
}

fn main_inner() -> Result<bool> {
    match Cli::parse().cmd {
        Cmd::Seed {
            rng_seed,
            rho,
            scenes,
            subgoals,
            out,
        } => {
            let cfg = PipelineConfig {
                rng_seed,
                rho,
                scenes,
                subgoal_budget: subgoals,
                ..PipelineConfig::default()
            };
            let (attempts, sampled, _) = plan(&cfg)?;
            let mut text = String::new();
            for a in &attempts {
                text.push_str(&serde_json::to_string(&a.seed)?);
                text.push('\n');
            }
            fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("{} seeds from {sampled} scenes", attempts.len());
        }
        Cmd::Verify { input, tol } => {
            let candidate = candidate_of(read_json(&input)?)?;
            let report = verify_record(&candidate, &ToleranceConfig::uniform(tol));
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(report.passed);
        }
        Cmd::Render { input, out, png } => {
            let pc = plot_code_of(read_json(&input)?)?;
            let svg = render_svg(&pc, &RenderStyle::default())?;
            fs::write(&out, &svg).with_context(|| format!("writing {}", out.display()))?;
            if png {
                let path = out.with_extension("png");
                fs::write(&path, svg_to_png(&svg)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Cmd::Eval { pred, truth, bins, tol } => {
            let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
            let report = evaluate(&read(&pred)?, &read(&truth)?, bins, tol)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Pipeline {
            cmd: PipelineCmd::Run { run, scripted },
        } => {
            let cfg = run.load()?;
            let gw = if scripted {
                scripted_gateway(&cfg)?.0
            } else {
                Gateway::from_config(cfg.gateway.clone())?
            };
            report(&cfg, &run_with(&cfg, &gw)?)?;
        }
        Cmd::Gateway { cmd } => match cmd {
            GatewayCmd::Record { run, transcript } => {
                let mut cfg = run.load()?;
                cfg.gateway.backend = BackendKind::Http;
                let gw = Gateway::from_config(cfg.gateway.clone())?.recording();
                let out = run_with(&cfg, &gw)?;
                fs::write(&transcript, transcript_to_jsonl(&gw.transcript()))
                    .with_context(|| format!("writing {}", transcript.display()))?;
                report(&cfg, &out)?;
            }
            GatewayCmd::Replay { run, transcript } => {
                let mut cfg = run.load()?;
                cfg.gateway.backend = BackendKind::Mock;
                cfg.gateway.transcript = Some(transcript);
                let gw = Gateway::from_config(cfg.gateway.clone())?;
                report(&cfg, &run_with(&cfg, &gw)?)?;
            }
            GatewayCmd::Script { run, transcript } => {
                let cfg = run.load()?;
                let (_, jsonl) = scripted_gateway(&cfg)?;
                fs::write(&transcript, jsonl).with_context(|| format!("writing {}", transcript.display()))?;
            }
        },
    }
    Ok(true)
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
