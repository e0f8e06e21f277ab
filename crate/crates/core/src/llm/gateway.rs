use std::collections::BTreeMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::schema::SchemaError;
use super::template::{repair_instruction, PromptRequest, TemplateId};

/// Line shown in place of any withheld text.
pub const REFUSAL_LINE: &str = "Sorry, I'd rather not talk about that.";

/// Variable added to a re-ask so scripted providers can key repairs separately.
pub const REPAIR_ATTEMPT_VAR: &str = "_repair_attempt";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Failed(String),
}

/// One rendered request as handed to a provider.
#[derive(Debug, Clone)]
pub struct ProviderCall<'a> {
    pub template_id: TemplateId,
    pub variables: &'a BTreeMap<String, String>,
    pub prompt: String,
    pub temperature: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReply {
    pub text: String,
    pub latency_ms: u64,
    /// The provider had no real answer and produced a canned one.
    pub fallback: bool,
}

/// A text-generation backend. Implementations must be safe to call concurrently.
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, call: &ProviderCall<'_>) -> Result<ProviderReply, TransportError>;
    /// `Ok(true)` when the text violates policy.
    fn moderate(&self, text: &str) -> Result<bool, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderResult {
    pub raw_text: String,
    #[serde(skip)]
    pub parsed: Result<Value, SchemaError>,
    /// Summed over every attempt.
    pub latency_ms: u64,
    pub provider_id: String,
    pub attempts: u32,
    pub fallback: bool,
}

impl ProviderResult {
    pub fn is_ok(&self) -> bool {
        self.parsed.is_ok()
    }

    pub fn value<T: DeserializeOwned>(&self) -> Result<T, SchemaError> {
        let v = self.parsed.as_ref().map_err(Clone::clone)?;
        serde_json::from_value(v.clone()).map_err(|e| SchemaError(e.to_string()))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("{template}: gave up after {attempts} transport attempts: {last}")]
    Transport { template: TemplateId, attempts: u32, last: TransportError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WithholdReason {
    Policy,
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "reason")]
pub enum Moderation {
    Allow,
    Withhold(WithholdReason),
}

impl Moderation {
    pub fn allowed(self) -> bool {
        self == Moderation::Allow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Re-asks after a schema violation.
    pub repair_attempts: u32,
    /// Total tries per request when the transport fails.
    pub transport_attempts: u32,
    pub extraction_temperature: f32,
    pub creative_temperature: f32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { repair_attempts: 2, transport_attempts: 3, extraction_temperature: 0.0, creative_temperature: 0.7 }
    }
}

/// The single choke-point for text generation and moderation.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    config: GatewayConfig,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("provider", &self.provider.id()).field("config", &self.config).finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        Self::with_config(provider, GatewayConfig::default())
    }

    pub fn with_config(provider: Arc<dyn Provider>, config: GatewayConfig) -> Self {
        Self { provider, config }
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn complete(&self, req: &PromptRequest) -> Result<ProviderResult, GatewayError> {
        self.complete_checked(req, |_| Ok(()))
    }

    /// Like [`Gateway::complete`], with an extra semantic check that counts as a schema failure.
    pub fn complete_checked(
        &self,
        req: &PromptRequest,
        check: impl Fn(&Value) -> Result<(), String>,
    ) -> Result<ProviderResult, GatewayError> {
        let temperature = if req.template_id.is_extraction() {
            self.config.extraction_temperature
        } else {
            self.config.creative_temperature
        };
        let base_prompt = req.render();
        let mut variables = req.variables.clone();
        let mut prompt = base_prompt.clone();
        let mut latency_ms = 0;
        let mut attempts = 0;

        for repair in 0..=self.config.repair_attempts {
            if repair > 0 {
                variables.insert(REPAIR_ATTEMPT_VAR.to_string(), repair.to_string());
            }
            let call = ProviderCall { template_id: req.template_id, variables: &variables, prompt: prompt.clone(), temperature };
            let reply = self.send(&call, &mut attempts, &mut latency_ms)?;
            let parsed = req.output_schema_id.validate(&reply.text).and_then(|v| check(&v).map(|_| v).map_err(SchemaError));
            match parsed {
                Ok(v) => {
                    return Ok(ProviderResult {
                        raw_text: reply.text,
                        parsed: Ok(v),
                        latency_ms,
                        provider_id: self.provider.id().to_string(),
                        attempts,
                        fallback: reply.fallback,
                    })
                }
                Err(e) if repair == self.config.repair_attempts => {
                    tracing::warn!(template = %req.template_id, error = %e, "schema failure after repairs");
                    return Ok(ProviderResult {
                        raw_text: reply.text,
                        parsed: Err(e),
                        latency_ms,
                        provider_id: self.provider.id().to_string(),
                        attempts,
                        fallback: reply.fallback,
                    });
                }
                Err(e) => {
                    tracing::debug!(template = %req.template_id, error = %e, "re-asking with repair instruction");
                    prompt = format!("{base_prompt}{}", repair_instruction(&e.0));
                }
            }
        }
        unreachable!("the repair loop always returns")
    }

    fn send(&self, call: &ProviderCall<'_>, attempts: &mut u32, latency_ms: &mut u64) -> Result<ProviderReply, GatewayError> {
        let tries = self.config.transport_attempts.max(1);
        let mut last = TransportError::Failed("no attempt made".into());
        for _ in 0..tries {
            *attempts += 1;
            match self.provider.complete(call) {
                Ok(reply) => {
                    *latency_ms += reply.latency_ms;
                    return Ok(reply);
                }
                Err(e) => {
                    tracing::warn!(template = %call.template_id, error = %e, "provider transport error");
                    last = e;
                }
            }
        }
        Err(GatewayError::Transport { template: call.template_id, attempts: tries, last })
    }

    /// Fails closed: a moderation outage withholds the text.
    pub fn moderate(&self, text: &str) -> Moderation {
        match self.provider.moderate(text) {
            Ok(false) => Moderation::Allow,
            Ok(true) => Moderation::Withhold(WithholdReason::Policy),
            Err(e) => {
                tracing::warn!(error = %e, "moderation unavailable, withholding");
                Moderation::Withhold(WithholdReason::Unavailable)
            }
        }
    }

    /// The text itself if allowed, otherwise the refusal line.
    pub fn screen(&self, text: &str) -> (String, Moderation) {
        let verdict = self.moderate(text);
        if verdict.allowed() {
            (text.to_string(), verdict)
        } else {
            (REFUSAL_LINE.to_string(), verdict)
        }
    }
}
