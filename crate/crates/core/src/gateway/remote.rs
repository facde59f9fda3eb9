//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{LmProvider, LmRequest, ProviderError, ProviderReply};
use crate::http::is_retryable_status;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatProviderConfig {
    pub base_url: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Hosted models can differ between identical greedy requests.
    pub deterministic: bool,
}

impl Default for ChatProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
            deterministic: false,
        }
    }
}

pub struct ChatProvider {
    config: ChatProviderConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    id: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: usize,
    completion_tokens: usize,
}

fn is_overflow(body: &str) -> bool {
    let lower = body.to_ascii_lowercase();
    lower.contains("context_length_exceeded") || lower.contains("maximum context length")
}

impl ChatProvider {
    pub fn new(config: ChatProviderConfig) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| e.to_string())?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let id = format!("chat:{}", config.base_url.trim_end_matches('/'));
        Ok(Self {
            config,
            client,
            api_key,
            id,
        })
    }
}

impl LmProvider for ChatProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        self.config.deterministic
    }

    fn call(&self, req: &LmRequest) -> Result<ProviderReply, ProviderError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        let mut http = self.client.post(url).json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let resp = http.send().map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| ProviderError::Transient(e.to_string()))?;
        if status == 429 {
            return Err(ProviderError::RateLimited(text));
        }
        if is_retryable_status(status) {
            return Err(ProviderError::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            if is_overflow(&text) {
                return Err(ProviderError::ContextOverflow(text));
            }
            return Err(ProviderError::Fatal(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| ProviderError::Fatal(format!("bad response: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Fatal("response has no message content".into()))?;
        Ok(match parsed.usage {
            Some(u) => ProviderReply {
                text: content,
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            },
            None => ProviderReply::counted(&req.prompt, content),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, GatewayConfig, GatewayError};
    use crate::http::RetryPolicy;
    use crate::testutil::serve;
    use std::sync::Arc;

    fn provider(url: &str) -> ChatProvider {
        ChatProvider::new(ChatProviderConfig {
            base_url: format!("{url}/v1/"),
            api_key_env: "RAGBENCH_TEST_UNSET_KEY".into(),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn retries_429_through_the_gateway() {
        let ok = r#"{"choices":[{"message":{"content":"Because. [[2]]"}}],"usage":{"prompt_tokens":11,"completion_tokens":3}}"#;
        let server = serve(vec![(429, "{}".into()), (200, ok.into())]);
        let gw = Gateway::new(
            Arc::new(provider(&server.url)),
            None,
            GatewayConfig {
                retry: RetryPolicy::immediate(3),
                ..Default::default()
            },
        );
        let resp = gw.complete(&LmRequest::greedy("gpt-4o-mini", "question", 512)).unwrap();
        assert_eq!(resp.text, "Because. [[2]]");
        assert_eq!((resp.prompt_tokens, resp.completion_tokens), (11, 3));
        assert_eq!(gw.telemetry().retries, 1);
        let requests = server.requests.lock().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&requests[1]).unwrap();
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["max_tokens"], 512);
        assert_eq!(sent["messages"][0]["content"], "question");
    }

    #[test]
    fn overlong_prompt_maps_to_context_overflow() {
        let body = r#"{"error":{"code":"context_length_exceeded","message":"too long"}}"#;
        let server = serve(vec![(400, body.into())]);
        let gw = Gateway::new(Arc::new(provider(&server.url)), None, GatewayConfig::default());
        assert!(matches!(
            gw.complete(&LmRequest::greedy("m", "x", 5)),
            Err(GatewayError::ContextOverflow(_))
        ));
    }
}
