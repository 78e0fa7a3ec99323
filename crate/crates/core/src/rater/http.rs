use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::prompt::{
    chat_body, chat_content, parse_rating_reply, parse_sort_reply, rating_prompt, sorting_prompt,
};
use super::{
    CallLedger, Oracle, OracleError, SortRequest, TokenCost, WindowRequest, WindowResponse,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpOracleConfig {
    /// Chat-completions URL.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. Keys are
    /// never stored in config files.
    pub api_key_env: Option<String>,
    pub timeout_s: f64,
    pub token_cost: TokenCost,
}

impl Default for HttpOracleConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: None,
            timeout_s: 120.0,
            token_cost: TokenCost::default(),
        }
    }
}

/// Oracle backed by a chat-completions endpoint.
pub struct HttpOracle {
    cfg: HttpOracleConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    ledger: CallLedger,
}

impl HttpOracle {
    pub fn new(cfg: HttpOracleConfig) -> Result<Self, OracleError> {
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                OracleError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        if !(cfg.timeout_s > 0.0) {
            return Err(OracleError::Config(format!(
                "timeout_s = {}",
                cfg.timeout_s
            )));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .build()
            .into();
        Ok(Self {
            cfg,
            agent,
            api_key,
            ledger: CallLedger::default(),
        })
    }

    fn post(&self, body: &Value) -> Result<String, OracleError> {
        let mut request = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let reply: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| OracleError::MalformedReply(format!("reply body: {e}")))?;
        chat_content(&reply).map(str::to_owned)
    }
}

impl Oracle for HttpOracle {
    fn rate_window(&mut self, req: &WindowRequest) -> Result<WindowResponse, OracleError> {
        req.validate()?;
        self.ledger
            .record_rate(req.frame_indices.len(), &self.cfg.token_cost);
        let body = chat_body(&self.cfg.model, &rating_prompt(req), &req.frame_indices);
        let started = Instant::now();
        let text = self.post(&body)?;
        let latency_s = started.elapsed().as_secs_f64();
        let parsed = parse_rating_reply(&text, req)?;
        Ok(WindowResponse {
            ratings: parsed.ratings,
            partial_summary: parsed.story_partial,
            total_summary: parsed.story_total,
            latency_s,
        })
    }

    fn sort_window(&mut self, req: &SortRequest) -> Result<Vec<usize>, OracleError> {
        req.validate()?;
        self.ledger
            .record_sort(req.candidate_indices.len(), &self.cfg.token_cost);
        let body = chat_body(
            &self.cfg.model,
            &sorting_prompt(req),
            &req.candidate_indices,
        );
        let text = self.post(&body)?;
        parse_sort_reply(&text, req)
    }

    fn ledger(&self) -> CallLedger {
        self.ledger
    }
}
