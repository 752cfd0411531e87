use std::collections::HashMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{GatewayError, Role};

/// Something that turns one rendered prompt into model text.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, role: Role, system: &str, prompt: &str, temperature: f64) -> Result<String, GatewayError>;
}

/// Transcript key: hex sha256 of `role + "\n" + prompt`.
pub fn prompt_hash(role: Role, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(role.as_str().as_bytes());
    h.update(b"\n");
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: Role,
    pub prompt_hash: String,
    pub response: String,
}

impl TranscriptEntry {
    pub fn new(role: Role, prompt: &str, response: impl Into<String>) -> Self {
        TranscriptEntry {
            role,
            prompt_hash: prompt_hash(role, prompt),
            response: response.into(),
        }
    }
}

/// One entry per line, sorted and deduplicated so the bytes do not depend
/// on completion order.
pub fn transcript_to_jsonl(entries: &[TranscriptEntry]) -> String {
    let mut sorted = entries.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted
        .iter()
        .map(|e| serde_json::to_string(e).expect("transcript entries serialize") + "\n")
        .collect()
}

/// Replays recorded responses; a prompt that was never recorded is an error.
#[derive(Clone, Debug, Default)]
pub struct MockBackend {
    entries: HashMap<String, String>,
}

impl MockBackend {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Result<Self, GatewayError> {
        let mut map: HashMap<String, String> = HashMap::new();
        for e in entries {
            if let Some(prev) = map.get(&e.prompt_hash) {
                if *prev != e.response {
                    return Err(GatewayError::Transcript(format!(
                        "conflicting responses for {}",
                        e.prompt_hash
                    )));
                }
            }
            map.insert(e.prompt_hash, e.response);
        }
        Ok(MockBackend { entries: map })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GatewayError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<TranscriptEntry>(l)
                    .map_err(|e| GatewayError::Transcript(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        MockBackend::new(entries)
    }

    pub fn from_path(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
        MockBackend::from_jsonl(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, role: Role, _system: &str, prompt: &str, _temperature: f64) -> Result<String, GatewayError> {
        let hash = prompt_hash(role, prompt);
        self.entries.get(&hash).cloned().ok_or(GatewayError::MockMiss(hash))
    }
}

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Slots {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Clone, Debug)]
pub struct HttpSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
    pub concurrency: usize,
}

/// Chat-completion client: one system and one user message per call.
pub struct HttpBackend {
    agent: ureq::Agent,
    settings: HttpSettings,
    slots: Slots,
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl HttpBackend {
    pub fn new(settings: HttpSettings) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(settings.timeout).build();
        let slots = Slots::new(settings.concurrency.max(1));
        HttpBackend { agent, settings, slots }
    }

    fn attempt(&self, body: &str) -> Result<String, Attempt> {
        let mut req = self.agent.post(&self.settings.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.settings.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = match req.send_string(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                return Err(if code == 429 || code >= 500 {
                    Attempt::Retry(format!("status {code}"))
                } else {
                    Attempt::Fatal(GatewayError::Http { status: code, body: text })
                });
            }
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        let text = resp.into_string().map_err(|e| Attempt::Retry(e.to_string()))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Attempt::Fatal(GatewayError::BadResponse(e.to_string())))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(GatewayError::BadResponse("missing choices[0].message.content".into())))
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, _role: Role, system: &str, prompt: &str, temperature: f64) -> Result<String, GatewayError> {
        let body = json!({
            "model": self.settings.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": prompt},
            ],
            "temperature": temperature,
        })
        .to_string();
        let mut last = String::new();
        for attempt in 0..=self.settings.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.settings.backoff * 2u32.saturating_pow(attempt - 1));
            }
            let outcome = {
                let _slot = self.slots.acquire();
                self.attempt(&body)
            };
            match outcome {
                Ok(content) => return Ok(content),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(GatewayError::Unavailable {
            attempts: self.settings.max_retries + 1,
            last,
        })
    }
}
