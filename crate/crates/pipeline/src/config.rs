use std::path::{Path, PathBuf};

use geoforge_core::deduction::ChainBudget;
use geoforge_core::geom::SampleBudget;
use geoforge_core::render::RenderStyle;
use geoforge_core::schema::ParseMode;
use geoforge_core::verify::ToleranceConfig;
use geoforge_gateway::GatewayConfig;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

/// Which rejection gates are enforced. A disabled gate lets every record
/// through; plot-code parsing cannot be disabled since later stages need it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    pub semantic: bool,
    pub geometric: bool,
    pub image: bool,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            semantic: true,
            geometric: true,
            image: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub rng_seed: u64,
    /// Number of sampled scenes (predicate sets).
    pub scenes: usize,
    /// Subgoals kept per scene before seed selection.
    pub subgoal_budget: usize,
    pub rho: f64,
    /// Stop after this many instantiation attempts.
    pub max_attempts: Option<usize>,
    pub sample: SampleBudget,
    pub chain: ChainBudget,
    pub tolerance: ToleranceConfig,
    pub style: RenderStyle,
    pub gateway: GatewayConfig,
    pub schema_mode: ParseMode,
    pub gates: Gates,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rng_seed: 0,
            scenes: 100,
            subgoal_budget: 64,
            rho: 0.2,
            max_attempts: None,
            sample: SampleBudget::default(),
            chain: ChainBudget::default(),
            tolerance: ToleranceConfig::default(),
            style: RenderStyle::default(),
            gateway: GatewayConfig::default(),
            schema_mode: ParseMode::Lenient,
            gates: Gates::default(),
            output_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.scenes == 0 {
            return bad("scenes must be at least 1");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if self.subgoal_budget == 0 {
            return bad("subgoal_budget must be at least 1");
        }
        if !self.tolerance.is_valid() {
            return bad("tolerances must be positive and finite");
        }
        self.style
            .validate()
            .map_err(|e| PipelineError::Config(format!("style: {e}")))?;
        self.gateway.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a JSON config; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Some(t) = cfg.gateway.transcript.as_mut() {
            if t.is_relative() {
                *t = base.join(&*t);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
