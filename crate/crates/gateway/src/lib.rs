//! Prompt templates, completion backends and JSON extraction for the model
//! roles of the synthesis pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

mod backend;
mod extract;
mod template;

pub use backend::{
    prompt_hash, transcript_to_jsonl, CompletionBackend, HttpBackend, HttpSettings, MockBackend, TranscriptEntry,
};
pub use extract::{extract_json, string_field, ExtractionError};
pub use template::{vars, PromptTemplate, Role, TemplateError};

/// Environment variable holding the bearer token for the HTTP backend.
pub const API_KEY_ENV: &str = "GEOFORGE_API_KEY";

const SYSTEM_PROMPT: &str = "Follow the user's instructions exactly and reply only in the requested format.";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("gateway unavailable after {attempts} attempts: {last}")]
    Unavailable { attempts: u32, last: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("no recorded response for prompt {0}")]
    MockMiss(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error("invalid gateway config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    #[default]
    Mock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub backend: BackendKind,
    pub endpoint: String,
    pub model: String,
    /// Per-role overrides of [`GatewayConfig::default_temperature`].
    pub temperatures: BTreeMap<Role, f64>,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
    pub concurrency: usize,
    /// JSONL transcript replayed by the mock backend.
    pub transcript: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            backend: BackendKind::Mock,
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            temperatures: BTreeMap::new(),
            max_retries: 3,
            backoff_ms: 250,
            timeout_ms: 120_000,
            concurrency: 4,
            transcript: None,
        }
    }
}

impl GatewayConfig {
    pub fn default_temperature(role: Role) -> f64 {
        match role {
            Role::InstructorComputation | Role::InstructorProof => 0.7,
            Role::CoderPlotcode => 0.2,
            _ => 0.0,
        }
    }

    pub fn temperature(&self, role: Role) -> f64 {
        self.temperatures
            .get(&role)
            .copied()
            .unwrap_or_else(|| GatewayConfig::default_temperature(role))
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.concurrency == 0 {
            return Err(GatewayError::Config("concurrency must be at least 1".into()));
        }
        if let Some((r, t)) = self.temperatures.iter().find(|(_, t)| !(0.0..=2.0).contains(*t)) {
            return Err(GatewayError::Config(format!("temperature {t} for {r} outside [0, 2]")));
        }
        if self.backend == BackendKind::Http && self.endpoint.is_empty() {
            return Err(GatewayError::Config("http backend needs an endpoint".into()));
        }
        Ok(())
    }

    pub fn http_settings(&self) -> HttpSettings {
        HttpSettings {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            max_retries: self.max_retries,
            backoff: Duration::from_millis(self.backoff_ms),
            timeout: Duration::from_millis(self.timeout_ms),
            concurrency: self.concurrency,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub reason: String,
}

impl Verdict {
    /// `passed` must be a JSON boolean; a missing `reason` reads as "".
    pub fn from_value(v: &Value) -> Verdict {
        match v.get("passed").and_then(Value::as_bool) {
            Some(passed) => Verdict {
                passed,
                reason: string_field(v, "reason").unwrap_or_default(),
            },
            None => Verdict::malformed(),
        }
    }

    /// Verdict from raw model text; no extractable object is malformed.
    pub fn parse(raw: &str) -> Verdict {
        extract_json(raw).map_or_else(|_| Verdict::malformed(), |v| Verdict::from_value(&v))
    }

    fn malformed() -> Verdict {
        Verdict {
            passed: false,
            reason: "malformed verdict".into(),
        }
    }
}

/// Renders role templates and sends them to a backend. Shareable across
/// threads.
pub struct Gateway {
    cfg: GatewayConfig,
    backend: Box<dyn CompletionBackend>,
    recorded: Option<Mutex<Vec<TranscriptEntry>>>,
}

impl Gateway {
    pub fn from_config(cfg: GatewayConfig) -> Result<Gateway, GatewayError> {
        cfg.validate()?;
        let backend: Box<dyn CompletionBackend> = match cfg.backend {
            BackendKind::Http => Box::new(HttpBackend::new(cfg.http_settings())),
            BackendKind::Mock => {
                let path = cfg
                    .transcript
                    .as_ref()
                    .ok_or_else(|| GatewayError::Config("mock backend needs a transcript path".into()))?;
                Box::new(MockBackend::from_path(path)?)
            }
        };
        Ok(Gateway::with_backend(cfg, backend))
    }

    pub fn with_backend(cfg: GatewayConfig, backend: Box<dyn CompletionBackend>) -> Gateway {
        Gateway {
            cfg,
            backend,
            recorded: None,
        }
    }

    /// Keeps every successful exchange for [`Gateway::transcript`].
    pub fn recording(mut self) -> Gateway {
        self.recorded = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn render(&self, role: Role, vars: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        Ok(role.template().render(vars)?)
    }

    /// Raw model text for `role` with `vars` filled in. Template errors are
    /// raised before the backend is called.
    pub fn complete(&self, role: Role, vars: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        let prompt = self.render(role, vars)?;
        let response = self
            .backend
            .complete(role, SYSTEM_PROMPT, &prompt, self.cfg.temperature(role))?;
        if let Some(rec) = &self.recorded {
            rec.lock()
                .unwrap_or_else(|e| e.into_inner())
                .push(TranscriptEntry::new(role, &prompt, response.clone()));
        }
        Ok(response)
    }

    /// [`Gateway::complete`] followed by [`extract_json`]; returns the raw
    /// text alongside the value.
    pub fn complete_json(&self, role: Role, vars: &BTreeMap<String, String>) -> Result<(String, Value), GatewayError> {
        let raw = self.complete(role, vars)?;
        let v = extract_json(&raw)?;
        Ok((raw, v))
    }

    /// Asks the judge role whether a problem, its reasoning and its answer
    /// are consistent. Unparseable output is a failed verdict.
    pub fn judge(&self, question: &str, cot: &str, answer: &str) -> Result<Verdict, GatewayError> {
        self.judge_raw(question, cot, answer).map(|(_, v)| v)
    }

    /// [`Gateway::judge`] that also returns the model text.
    pub fn judge_raw(&self, question: &str, cot: &str, answer: &str) -> Result<(String, Verdict), GatewayError> {
        let raw = self.complete(Role::Judge, &vars([("question", question), ("cot", cot), ("answer", answer)]))?;
        let verdict = Verdict::parse(&raw);
        Ok((raw, verdict))
    }

    /// Exchanges recorded so far, sorted by role and hash.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        let mut out = self
            .recorded
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|e| e.into_inner()).clone())
            .unwrap_or_default();
        out.sort();
        out.dedup();
        out
    }
}
