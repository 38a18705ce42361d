//! OpenAI-compatible HTTP backends (chat completions and embeddings).

use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{Backend, BackendError, BackendRequest};
use crate::retrieval::{Embedder, RetrievalError};

/// Endpoint, model and the environment variable holding the API key.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout: Duration,
}

struct Client {
    http: reqwest::blocking::Client,
    config: RemoteConfig,
    api_key: String,
}

impl Client {
    fn new(config: RemoteConfig) -> Result<Self, String> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| format!("environment variable {} is not set", config.api_key_env))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { http, config, api_key })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, String> {
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path);
        let response = self
            .http
            .post(url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status();
        let value: Value = response.json().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("HTTP {status}: {value}"));
        }
        Ok(value)
    }
}

pub struct ChatBackend {
    client: Client,
    id: String,
}

impl ChatBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let id = config.model.clone();
        Ok(Self {
            client: Client::new(config).map_err(BackendError::Config)?,
            id,
        })
    }
}

impl Backend for ChatBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.client.config.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        let value = self.client.post("chat/completions", &body).map_err(BackendError::Transport)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Transport(format!("no message content in {value}")))
    }
}

pub struct RemoteEmbedder {
    client: Client,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteConfig) -> Result<Self, RetrievalError> {
        Ok(Self {
            client: Client::new(config).map_err(RetrievalError::Backend)?,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn model(&self) -> &str {
        &self.client.config.model
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        let body = json!({"model": self.client.config.model, "input": texts});
        let value = self.client.post("embeddings", &body).map_err(RetrievalError::Backend)?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| RetrievalError::Backend(format!("no embedding data in {value}")))?;
        data.iter()
            .map(|item| {
                item["embedding"]
                    .as_array()
                    .and_then(|v| v.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                    .ok_or_else(|| RetrievalError::Backend("malformed embedding vector".into()))
            })
            .collect()
    }
}
