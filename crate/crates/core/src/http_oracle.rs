//! Oracle backed by an OpenAI-compatible chat-completions endpoint.
//!
//! Each init/update issues one blocking request: a system message asking for
//! the guess wire schema and a user message carrying the rendered prompt.
//! Transient failures (transport errors, retryable HTTP statuses) are
//! retried up to twice with exponential backoff; after that the error
//! surfaces as an oracle failure, which the engine degrades to a no-guess.

use std::time::Duration;

use serde::Deserialize;

use crate::oracle::{InitPrompt, IntuitionOracle, OracleError, UpdatePrompt};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "NSTS_LLM_API_KEY";
/// Environment variable that may supply the endpoint URL.
pub const ENDPOINT_ENV: &str = "NSTS_LLM_ENDPOINT";

pub const SYSTEM_PREAMBLE: &str = "You are the guessing oracle of a logic programming engine. \
Reply with a single JSON object of the form \
{\"solution\": {\"<VarName>\": \"<term text>\", ...} | null, \
\"derivation\": {\"goal\": \"<term text>\", \"clause\": <clause index>, \"children\": [...]} | null}. \
Terms use the program's syntax (lowercase atoms, uppercase variables, integers, functor(args)). \
Clause indices are zero-based positions in the program listing. \
Any prose outside the JSON object is ignored.";

#[derive(Debug, Clone)]
pub struct LlmConfig {
    /// Base URL; requests go to `<endpoint>/chat/completions`.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    /// Whether a missing API key is a configuration error. Local endpoints
    /// can turn this off.
    pub require_api_key: bool,
    /// Key override; when absent the key is read from [`API_KEY_ENV`].
    pub api_key: Option<String>,
    /// Base delay of the exponential backoff between retries.
    pub retry_base: Duration,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: String::new(),
            model: "gpt-4o".to_string(),
            temperature: 0.2,
            max_tokens: 2048,
            timeout: Duration::from_secs(60),
            require_api_key: true,
            api_key: None,
            retry_base: Duration::from_millis(500),
        }
    }
}

#[derive(Debug)]
pub struct HttpLlmOracle {
    cfg: LlmConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Debug, Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: String,
}

impl HttpLlmOracle {
    pub fn new(cfg: LlmConfig) -> Result<Self, OracleError> {
        if cfg.endpoint.is_empty() {
            return Err(OracleError::Config("LLM endpoint is not configured".into()));
        }
        let api_key = cfg.api_key.clone().or_else(|| std::env::var(API_KEY_ENV).ok());
        if cfg.require_api_key && api_key.is_none() {
            return Err(OracleError::Config(format!(
                "endpoint requires an API key; set {}",
                API_KEY_ENV
            )));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| OracleError::Config(e.to_string()))?;
        Ok(HttpLlmOracle { cfg, api_key, client })
    }

    fn chat(&self, user_prompt: &str) -> Result<String, OracleError> {
        let url = format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
            "messages": [
                { "role": "system", "content": SYSTEM_PREAMBLE },
                { "role": "user", "content": user_prompt },
            ],
        });

        let mut last_err = OracleError::Transport("no attempt made".into());
        for attempt in 0..3 {
            if attempt > 0 {
                std::thread::sleep(self.cfg.retry_base * (1 << (attempt - 1)));
            }
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let reply: ChatReply = resp
                            .json()
                            .map_err(|e| OracleError::Transport(format!("bad reply body: {}", e)))?;
                        return reply
                            .choices
                            .first()
                            .map(|c| c.message.content.clone())
                            .ok_or_else(|| {
                                OracleError::Transport("reply contained no choices".into())
                            });
                    }
                    last_err = OracleError::Http(status.as_u16());
                    // client errors other than rate limiting will not heal
                    if status.as_u16() != 429 && status.is_client_error() {
                        return Err(last_err);
                    }
                }
                Err(e) => {
                    last_err = OracleError::Transport(e.to_string());
                }
            }
        }
        Err(last_err)
    }
}

impl IntuitionOracle for HttpLlmOracle {
    fn init(&mut self, prompt: &InitPrompt<'_>) -> Result<String, OracleError> {
        self.chat(prompt.rendered)
    }

    fn update(&mut self, prompt: &UpdatePrompt<'_>) -> Result<String, OracleError> {
        let user = if prompt.report.is_empty() {
            prompt.intuition.to_string()
        } else {
            format!("{}\n\n{}", prompt.intuition, prompt.report)
        };
        self.chat(&user)
    }

    fn name(&self) -> &str {
        "llm"
    }
}
