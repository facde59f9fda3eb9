//! Builds readers and embedders from configuration.

use std::sync::Arc;

use ragbench_core::bench::{SyntheticCorpus, SyntheticReader};
use ragbench_core::gateway::{
    ChatProvider, ChatProviderConfig, ExtractiveMock, Gateway, GatewayConfig, LmProvider, LmRequest, ModelHandle,
    ProviderError, ProviderReply, ResponseCache, ScriptedProvider,
};
use ragbench_core::retrieval::{
    CachedEmbedder, Embedder, EmbeddingCache, HashedBagEmbedder, RemoteEmbedder, RemoteEmbedderConfig,
};

use crate::config::{EmbedderKind, ExperimentConfig, ReaderKind};
use crate::CliError;

struct DeterminismOverride {
    inner: Box<dyn LmProvider>,
    deterministic: bool,
}

impl LmProvider for DeterminismOverride {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn deterministic(&self) -> bool {
        self.deterministic
    }

    fn call(&self, req: &LmRequest) -> Result<ProviderReply, ProviderError> {
        self.inner.call(req)
    }
}

pub fn build_reader(
    config: &ExperimentConfig,
    synthetic: Option<&SyntheticCorpus>,
) -> Result<Arc<dyn LmProvider>, CliError> {
    let r = &config.reader;
    let provider: Box<dyn LmProvider> = match r.provider {
        ReaderKind::Openai => {
            let defaults = ChatProviderConfig::default();
            let chat = ChatProviderConfig {
                base_url: r.base_url.clone().unwrap_or(defaults.base_url),
                api_key_env: r.api_key_env.clone().unwrap_or(defaults.api_key_env),
                timeout_secs: r.timeout_secs.unwrap_or(defaults.timeout_secs),
                deterministic: r.deterministic.unwrap_or(defaults.deterministic),
            };
            return Ok(Arc::new(ChatProvider::new(chat).map_err(CliError::Provider)?));
        }
        ReaderKind::Scripted => {
            let path = r
                .script
                .as_ref()
                .ok_or_else(|| CliError::Config("scripted reader needs `script`".into()))?;
            Box::new(ScriptedProvider::from_file(path).map_err(CliError::Config)?)
        }
        ReaderKind::ExtractiveMock => Box::new(ExtractiveMock::default()),
        ReaderKind::SyntheticOracle | ReaderKind::SyntheticOracleOrdered => {
            let corpus =
                synthetic.ok_or_else(|| CliError::Config("synthetic oracle needs a synthetic corpus".into()))?;
            Box::new(SyntheticReader::new(
                corpus,
                r.provider == ReaderKind::SyntheticOracleOrdered,
            ))
        }
    };
    Ok(match r.deterministic {
        Some(deterministic) => Arc::new(DeterminismOverride {
            inner: provider,
            deterministic,
        }),
        None => Arc::from(provider),
    })
}

pub fn build_gateway(config: &ExperimentConfig, provider: Arc<dyn LmProvider>) -> Result<ModelHandle, CliError> {
    let cache = ResponseCache::open(config.lm_cache_dir())?;
    let gateway_config = GatewayConfig {
        max_in_flight: config.reader.max_in_flight.unwrap_or(config.concurrency).max(1),
        requests_per_second: config.reader.requests_per_second,
        ..GatewayConfig::default()
    };
    let gateway = Arc::new(Gateway::new(provider, Some(cache), gateway_config));
    Ok(gateway.model(config.reader.model.clone()))
}

pub fn build_embedder(config: &ExperimentConfig) -> Result<Arc<dyn Embedder>, CliError> {
    let e = &config.embedder;
    let inner: Arc<dyn Embedder> = match e.provider {
        EmbedderKind::Mock => Arc::new(HashedBagEmbedder::default()),
        EmbedderKind::Openai => {
            let defaults = RemoteEmbedderConfig::default();
            let remote = RemoteEmbedderConfig {
                endpoint: e.endpoint.clone().unwrap_or(defaults.endpoint.clone()),
                model: e.model.clone().unwrap_or(defaults.model.clone()),
                api_key_env: e.api_key_env.clone().unwrap_or(defaults.api_key_env.clone()),
                query_prefix: e.query_prefix.clone(),
                document_prefix: e.document_prefix.clone(),
                ..defaults
            };
            Arc::new(RemoteEmbedder::new(remote).map_err(|err| CliError::Provider(err.to_string()))?)
        }
    };
    let cache = EmbeddingCache::open(config.embedding_cache_dir())?;
    Ok(Arc::new(CachedEmbedder::new(inner, cache)))
}
