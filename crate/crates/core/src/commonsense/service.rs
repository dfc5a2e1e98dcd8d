//! Client for a remote text-generation service.
//!
//! Wire format: POST `{prompt, top_p, max_tokens, stop}` and receive
//! `{completion}`. The bearer credential is read from an environment
//! variable at call time and never stored.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{format_prompt, parse_completion, Exemplar};
use super::{GenerationConfig, InferenceProvider, InferenceSet, PromptMode, Provenance, Source};
use crate::corpus::Mention;
use crate::error::{Error, Result};

pub const DEFAULT_CREDENTIAL_ENV: &str = "TECR_GENERATION_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub top_p: f64,
    pub max_tokens: usize,
    pub stop: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub completion: String,
}

#[derive(Debug, Clone)]
pub struct GenerationClient {
    pub endpoint: String,
    pub model_id: String,
    pub credential_env: String,
    pub timeout: Duration,
    pub attempts: u32,
    pub backoff: Duration,
}

impl GenerationClient {
    pub fn new(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        GenerationClient {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            credential_env: DEFAULT_CREDENTIAL_ENV.to_string(),
            timeout: Duration::from_secs(60),
            attempts: 3,
            backoff: Duration::from_secs(1),
        }
    }

    /// Send one prompt, retrying with exponential backoff.
    pub fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String> {
        let request = GenerationRequest {
            prompt: prompt.to_string(),
            top_p: config.top_p,
            max_tokens: config.max_tokens,
            stop: config.stop.clone(),
        };
        let credential = std::env::var(&self.credential_env).ok();
        let mut delay = self.backoff;
        let mut last_err = String::new();
        for attempt in 1..=self.attempts.max(1) {
            match crate::http::post_json::<_, GenerationResponse>(
                &self.endpoint,
                &request,
                self.timeout,
                credential.as_deref(),
            ) {
                Ok(r) => return Ok(r.completion),
                Err(e) => {
                    log::warn!("generation attempt {attempt} failed: {e}");
                    last_err = e;
                    if attempt < self.attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(Error::GenerationService(format!(
            "{} attempts failed; last error: {last_err}",
            self.attempts
        )))
    }
}

/// Prompts the generation service and parses its completion.
#[derive(Debug, Clone)]
pub struct ServiceProvider {
    pub client: GenerationClient,
    pub mode: PromptMode,
    pub exemplars: Option<Vec<Exemplar>>,
}

impl InferenceProvider for ServiceProvider {
    fn fingerprint(&self) -> String {
        let kind = match self.mode {
            PromptMode::Finetuned => "service",
            PromptMode::Fewshot => "fewshot",
        };
        let exemplars = self
            .exemplars
            .as_ref()
            .map(|e| crate::util::sha256_hex(serde_json::to_string(e).unwrap_or_default().as_bytes()))
            .unwrap_or_default();
        format!(
            "{kind}:{}@{}#{}",
            self.client.model_id,
            self.client.endpoint,
            exemplars.get(..12).unwrap_or("")
        )
    }

    fn generate(&self, mention: &Mention, context: &[String], config: &GenerationConfig) -> Result<InferenceSet> {
        let context = context.join(" ");
        let prompt = format_prompt(&context, &mention.text, self.mode, self.exemplars.as_deref())?;
        let completion = self.client.complete(&prompt, config)?;
        let parsed = parse_completion(&completion, config.k, &config.stop);
        let source = match self.mode {
            PromptMode::Finetuned => Source::Service(self.client.model_id.clone()),
            PromptMode::Fewshot => Source::Fewshot(self.client.model_id.clone()),
        };
        let mut provenance = Provenance::new(source);
        if parsed.missing_after {
            provenance = provenance.with_warning("missing-after");
        }
        Ok(InferenceSet {
            doc_id: mention.doc_id.clone(),
            mention_id: mention.mention_id.clone(),
            before: parsed.before,
            after: parsed.after,
            provenance,
        })
    }
}
