//! Seed sampling, model-driven instantiation, verification gates, rendering
//! and persistence of synthetic plane-geometry problems.

mod attempt;
mod config;
mod debias;
pub mod eval;
mod persist;
mod png;
mod run;
pub mod script;

pub use attempt::{coder_vars, generate_attempts, instructor_request, route, scene_seeds, seeds_for_scene, Attempt};
pub use config::{Gates, PipelineConfig};
pub use debias::{annotation_text, debias, plotting_code_text, step2_vars, surviving_literals, DebiasError, Debiased};
pub use png::{svg_to_png, PngError};
pub use persist::{hash_walk, persist, read_records, FileEntry, Manifest, MANIFEST_FILE};
pub use run::{
    plan, process_attempt, run, run_attempts, run_with, DatasetRecord, Outcome, RawTexts, Rejection, Retained,
    RunOutput, SeedProvenance, StageStats,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] geoforge_gateway::GatewayError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("refusing to replace {0}: not a previous output directory")]
    NotAnOutputDir(String),
    #[error("{path}: {message}")]
    Corrupt { path: String, message: String },
}

impl PipelineError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
