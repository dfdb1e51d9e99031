use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::{Prompt, PromptKind, LABELS, SYSTEM_PREAMBLE};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response body: {0}")]
    Decode(String),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("scripted backend has no responses left")]
    Exhausted,
}

/// A chat model. Implementations must tolerate concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError>;
}

/// Answers from a known source-name → target-name mapping: the label of the
/// true option when it is offered, "None" otherwise, and the true name for
/// virtual-entity prompts.
#[derive(Debug, Clone, Default)]
pub struct NameOracle {
    truth: HashMap<String, String>,
}

impl NameOracle {
    pub fn new(truth: HashMap<String, String>) -> Self {
        Self { truth }
    }
}

impl LlmBackend for NameOracle {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        let truth = self.truth.get(&prompt.subject);
        Ok(match prompt.kind {
            PromptKind::VirtualEntity => truth.cloned().unwrap_or_else(|| prompt.subject.clone()),
            PromptKind::MultiChoice => match truth.and_then(|t| prompt.options.iter().position(|o| o == t)) {
                Some(i) => LABELS[i].to_string(),
                None => "None of the options is equivalent.".to_string(),
            },
        })
    }
}

/// Replays canned responses in order and records every prompt it receives.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<Prompt>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<Prompt> {
        self.seen.lock().expect("poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("poisoned").len()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        self.seen.lock().expect("poisoned").push(prompt.clone());
        self.responses
            .lock()
            .expect("poisoned")
            .pop_front()
            .ok_or(BackendError::Exhausted)
    }
}

/// Backend computed by a closure, for policy-style test doubles.
pub struct FnBackend<F>(pub F);

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&Prompt) -> String + Send + Sync,
{
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        Ok((self.0)(prompt))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    /// Full URL of an OpenAI-compatible chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Transport-level retries per request.
    pub retries: usize,
    /// Upper bound on requests in flight.
    pub max_concurrency: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: "ENTALIGN_API_KEY".into(),
            timeout_secs: 60,
            retries: 2,
            max_concurrency: 4,
        }
    }
}

/// Chat-completions client: posts `{model, messages, temperature: 0}` and
/// reads `choices[0].message.content`.
pub struct HttpBackend {
    config: LiveConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }

    /// Like [`HttpBackend::new`] but fails when the credential variable is unset.
    pub fn with_required_key(config: LiveConfig) -> Result<Self, BackendError> {
        let b = Self::new(config)?;
        if b.api_key.is_none() {
            return Err(BackendError::MissingCredential(b.config.api_key_env.clone()));
        }
        Ok(b)
    }

    pub fn request_body(&self, prompt: &Prompt) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PREAMBLE},
                {"role": "user", "content": prompt.render()},
            ],
        })
    }

    fn send_once(&self, body: &serde_json::Value) -> Result<String, BackendError> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Decode(format!("{e}: {text}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Decode(text))
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        let body = self.request_body(prompt);
        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Ok(s) => return Ok(s),
                Err(BackendError::Transport(_) | BackendError::Status { status: 429 | 500..=599, .. })
                    if attempt < self.config.retries =>
                {
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(200 * attempt as u64));
                }
                Err(e) => return Err(e),
            }
        }
    }
}
