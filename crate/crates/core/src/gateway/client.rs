use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cache::{cache_key, CacheRecord, ProviderMeta, ResponseCache};
use super::limit::{Semaphore, TokenBucket};
use super::{GatewayError, LanguageModel, LmProvider, LmRequest, LmResponse, ProviderError};
use crate::http::{with_retries, Failure, RetryPolicy};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub max_in_flight: usize,
    /// Sustained requests per second; `None` disables rate limiting.
    pub requests_per_second: Option<f64>,
    pub burst: f64,
    pub retry: RetryPolicy,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_in_flight: 8,
            requests_per_second: None,
            burst: 8.0,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Telemetry {
    pub provider_calls: AtomicU64,
    pub cache_hits: AtomicU64,
    pub retries: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetrySnapshot {
    pub provider_calls: u64,
    pub cache_hits: u64,
    pub retries: u64,
}

impl Telemetry {
    pub fn snapshot(&self) -> TelemetrySnapshot {
        TelemetrySnapshot {
            provider_calls: self.provider_calls.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
        }
    }
}

/// Cache-first access to one LM provider, with retries, a concurrency cap
/// and an optional rate limit.
pub struct Gateway {
    provider: Arc<dyn LmProvider>,
    cache: Option<ResponseCache>,
    config: GatewayConfig,
    slots: Semaphore,
    bucket: Option<TokenBucket>,
    telemetry: Telemetry,
}

impl Gateway {
    pub fn new(provider: Arc<dyn LmProvider>, cache: Option<ResponseCache>, config: GatewayConfig) -> Self {
        let bucket = config
            .requests_per_second
            .map(|rps| TokenBucket::new(config.burst.max(1.0), rps));
        Self {
            provider,
            cache,
            slots: Semaphore::new(config.max_in_flight),
            bucket,
            config,
            telemetry: Telemetry::default(),
        }
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn provider_is_deterministic(&self) -> bool {
        self.provider.deterministic()
    }

    pub fn telemetry(&self) -> TelemetrySnapshot {
        self.telemetry.snapshot()
    }

    pub fn complete(&self, req: &LmRequest) -> Result<LmResponse, GatewayError> {
        self.complete_for_run(req, 0)
    }

    /// Like [`Gateway::complete`], but repeated runs against a provider that
    /// declares itself nondeterministic get separate cache entries.
    pub fn complete_for_run(&self, req: &LmRequest, run_index: usize) -> Result<LmResponse, GatewayError> {
        if req.temperature != 0.0 {
            return Err(GatewayError::Validation(format!(
                "temperature must be 0 for experiment traffic, got {}",
                req.temperature
            )));
        }
        let salt = if self.provider.deterministic() {
            self.provider.id().to_string()
        } else {
            format!("{}|run-{run_index}", self.provider.id())
        };
        let key = cache_key(req, &salt);
        if let Some(cache) = &self.cache {
            if let Some(mut hit) = cache.get(&key) {
                self.telemetry.cache_hits.fetch_add(1, Ordering::Relaxed);
                hit.cached = true;
                return Ok(hit);
            }
        }

        let (reply, retries) = {
            let _permit = self.slots.acquire();
            with_retries(self.config.retry, || {
                if let Some(bucket) = &self.bucket {
                    bucket.acquire();
                }
                self.telemetry.provider_calls.fetch_add(1, Ordering::Relaxed);
                self.provider.call(req).map_err(|e| match e {
                    ProviderError::RateLimited(_) | ProviderError::Transient(_) => Failure::Retryable(e),
                    other => Failure::Permanent(other),
                })
            })
            .map_err(GatewayError::from)?
        };
        self.telemetry.retries.fetch_add(u64::from(retries), Ordering::Relaxed);

        let response = LmResponse {
            text: reply.text,
            prompt_tokens: reply.prompt_tokens,
            completion_tokens: reply.completion_tokens,
            cached: false,
        };
        if let Some(cache) = &self.cache {
            cache.insert(CacheRecord {
                key,
                request: req.clone(),
                response: response.clone(),
                provider: ProviderMeta {
                    provider_id: self.provider.id().to_string(),
                    retries,
                },
            })?;
        }
        Ok(response)
    }

    pub fn model(self: &Arc<Self>, model_id: impl Into<String>) -> ModelHandle {
        ModelHandle {
            gateway: Arc::clone(self),
            model_id: model_id.into(),
            run_index: 0,
        }
    }
}

/// A gateway bound to one model id and run index.
#[derive(Clone)]
pub struct ModelHandle {
    gateway: Arc<Gateway>,
    model_id: String,
    run_index: usize,
}

impl ModelHandle {
    pub fn for_run(&self, run_index: usize) -> Self {
        Self {
            run_index,
            ..self.clone()
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<LmResponse, GatewayError> {
        let req = LmRequest::greedy(self.model_id.clone(), prompt, max_output_tokens);
        self.gateway.complete_for_run(&req, self.run_index)
    }
}

impl LanguageModel for ModelHandle {
    fn generate(&self, prompt: &str, max_output_tokens: usize) -> Result<String, GatewayError> {
        Ok(self.complete(prompt, max_output_tokens)?.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FnProvider, ProviderReply};
    use std::sync::atomic::AtomicUsize;

    fn echo() -> Arc<dyn LmProvider> {
        Arc::new(FnProvider::new("echo", true, |req: &LmRequest| {
            Ok(ProviderReply::counted(&req.prompt, format!("echo: {}", req.prompt)))
        }))
    }

    #[test]
    fn second_identical_request_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::new(
            echo(),
            Some(ResponseCache::open(dir.path()).unwrap()),
            GatewayConfig::default(),
        );
        let req = LmRequest::greedy("m", "hello", 16);
        let first = gw.complete(&req).unwrap();
        let second = gw.complete(&req).unwrap();
        assert!(!first.cached);
        assert!(second.cached);
        assert_eq!(first.text, second.text);
        for _ in 0..5 {
            gw.complete(&req).unwrap();
        }
        assert_eq!(gw.telemetry().provider_calls, 1);
        assert_eq!(gw.telemetry().cache_hits, 6);
    }

    #[test]
    fn rate_limited_then_success_counts_one_retry() {
        let calls = Arc::new(AtomicUsize::new(0));
        let seen = calls.clone();
        let provider = FnProvider::new("flaky", true, move |req: &LmRequest| {
            if seen.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(ProviderError::RateLimited("429".into()))
            } else {
                Ok(ProviderReply::counted(&req.prompt, "ok".to_string()))
            }
        });
        let config = GatewayConfig {
            retry: RetryPolicy::immediate(3),
            ..Default::default()
        };
        let gw = Gateway::new(Arc::new(provider), None, config);
        let resp = gw.complete(&LmRequest::greedy("m", "p", 8)).unwrap();
        assert_eq!(resp.text, "ok");
        assert_eq!(gw.telemetry().retries, 1);
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn context_overflow_is_not_retried() {
        let provider = FnProvider::new("small", true, |_: &LmRequest| {
            Err(ProviderError::ContextOverflow("too long".into()))
        });
        let gw = Gateway::new(Arc::new(provider), None, GatewayConfig::default());
        assert!(matches!(
            gw.complete(&LmRequest::greedy("m", "p", 8)),
            Err(GatewayError::ContextOverflow(_))
        ));
        assert_eq!(gw.telemetry().provider_calls, 1);
    }

    #[test]
    fn nondeterministic_provider_keys_by_run() {
        let dir = tempfile::tempdir().unwrap();
        let provider = FnProvider::new("live", false, |req: &LmRequest| {
            Ok(ProviderReply::counted(&req.prompt, "x".to_string()))
        });
        let gw = Arc::new(Gateway::new(
            Arc::new(provider),
            Some(ResponseCache::open(dir.path()).unwrap()),
            GatewayConfig::default(),
        ));
        let model = gw.model("m");
        model.for_run(0).generate("p", 8).unwrap();
        model.for_run(1).generate("p", 8).unwrap();
        model.for_run(1).generate("p", 8).unwrap();
        assert_eq!(gw.telemetry().provider_calls, 2);
    }

    #[test]
    fn nonzero_temperature_rejected() {
        let gw = Gateway::new(echo(), None, GatewayConfig::default());
        let mut req = LmRequest::greedy("m", "p", 8);
        req.temperature = 0.7;
        assert!(matches!(gw.complete(&req), Err(GatewayError::Validation(_))));
    }
}
