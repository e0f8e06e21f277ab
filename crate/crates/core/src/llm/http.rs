//! Provider backed by an OpenAI-compatible chat completions endpoint.

use std::time::{Duration, Instant};

use serde_json::{json, Value};
use ureq::Agent;

use super::gateway::{Provider, ProviderCall, ProviderReply, TransportError};

pub const URL_ENV: &str = "VIGNETTE_LLM_URL";
pub const MODEL_ENV: &str = "VIGNETTE_LLM_MODEL";
pub const KEY_ENV: &str = "VIGNETTE_LLM_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Base URL, e.g. `https://api.example.com/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var(URL_ENV).ok().filter(|s| !s.is_empty())?;
        Some(Self {
            base_url,
            model: std::env::var(MODEL_ENV).unwrap_or_else(|_| "gpt-4o".into()),
            api_key: std::env::var(KEY_ENV).ok().filter(|s| !s.is_empty()),
            timeout: Duration::from_secs(60),
        })
    }
}

pub struct HttpProvider {
    config: HttpConfig,
    agent: Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("base_url", &self.config.base_url).field("model", &self.config.model).finish()
    }
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        let agent = Agent::config_builder().timeout_global(Some(config.timeout)).build().into();
        Self { config, agent }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.agent.post(&self.url(path));
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(map_err)?;
        resp.body_mut().read_json::<Value>().map_err(map_err)
    }
}

fn map_err(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Failed(other.to_string()),
    }
}

impl Provider for HttpProvider {
    fn id(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, call: &ProviderCall<'_>) -> Result<ProviderReply, TransportError> {
        let body = json!({
            "model": self.config.model,
            "temperature": call.temperature,
            "messages": [{ "role": "user", "content": call.prompt }],
        });
        let started = Instant::now();
        let v = self.post("chat/completions", &body)?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| TransportError::Failed("response has no choices[0].message.content".into()))?;
        Ok(ProviderReply { text: text.to_string(), latency_ms: started.elapsed().as_millis() as u64, fallback: false })
    }

    fn moderate(&self, text: &str) -> Result<bool, TransportError> {
        let v = self.post("moderations", &json!({ "input": text }))?;
        v.pointer("/results/0/flagged")
            .and_then(Value::as_bool)
            .ok_or_else(|| TransportError::Failed("response has no results[0].flagged".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use crate::llm::template::TemplateId;

    /// Serves one canned JSON body per connection, then stops.
    fn serve(bodies: Vec<&'static str>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for body in bodies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let reply = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    body.len(),
                    body
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/v1")
    }

    fn provider(url: String) -> HttpProvider {
        HttpProvider::new(HttpConfig { base_url: url, model: "test-model".into(), api_key: Some("k".into()), timeout: Duration::from_secs(5) })
    }

    #[test]
    fn completes_and_moderates_against_a_local_endpoint() {
        let url = serve(vec![
            r#"{"choices":[{"message":{"role":"assistant","content":"{\"reply\":\"hi\"}"}}]}"#,
            r#"{"results":[{"flagged":true}]}"#,
        ]);
        let p = provider(url);
        let vars = BTreeMap::new();
        let call = ProviderCall { template_id: TemplateId::CharChat, variables: &vars, prompt: "say hi".into(), temperature: 0.7 };
        let reply = p.complete(&call).unwrap();
        assert_eq!(reply.text, "{\"reply\":\"hi\"}");
        assert!(!reply.fallback);
        assert!(p.moderate("anything").unwrap());
    }

    #[test]
    fn malformed_response_is_a_transport_error() {
        let url = serve(vec![r#"{"nothing":1}"#]);
        let p = provider(url);
        assert!(matches!(p.moderate("x"), Err(TransportError::Failed(_))));
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let p = provider("http://127.0.0.1:1/v1".into());
        assert!(p.moderate("x").is_err());
    }
}
