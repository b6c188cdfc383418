//! Service catalog and backend registry.
//!
//! The [`Registry`] maps API routes to [`ServiceDescriptor`]s and backend
//! identifiers to [`Backend`] plugins, and is the only way to invoke a
//! backend. Registration is serialized; lookups and inference run
//! concurrently behind read locks.

mod backend;
mod eval;
mod face;
mod hash;
mod stub;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricsError};

pub use backend::{
    Backend, BackendKind, Classifier, Embedder, LabelSet, Regressor, ScoreRange,
};
pub use eval::{EvaluationReport, EvaluationRow, EvaluationTarget, MetricName};
pub use face::{embed, Embedding, FaceIndex, FaceMatch, HistogramEmbedder, EMBEDDING_DIM};
pub use hash::{fnv1a64, splitmix64};
pub use stub::{SimulatedCost, StubClassifier, StubRegressor, PEAK_LOGIT};

/// Default `k` for classification responses.
pub const DEFAULT_CLASSIFY_K: usize = 1;
/// Default `k` for retrieval responses.
pub const DEFAULT_SEARCH_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("route {0:?} is already registered")]
    DuplicateRoute(String),
    #[error("backend {0:?} is already registered")]
    DuplicateBackend(String),
    #[error("invalid service descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("unknown route {0:?}")]
    UnknownRoute(String),
    #[error("backend {id:?} is a {actual} backend, not {expected}")]
    KindMismatch {
        id: String,
        expected: BackendKind,
        actual: BackendKind,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("k = {k} outside 1..={available}")]
    InvalidTopK { k: usize, available: usize },
    #[error("face index is empty")]
    EmptyIndex,
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("zero variance in {0} series")]
    DegenerateVariance(&'static str),
    #[error(transparent)]
    Metrics(MetricsError),
}

impl From<MetricsError> for RegistryError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::DegenerateVariance(which) => Self::DegenerateVariance(which),
            MetricsError::EmptyInput => Self::EmptyDataset,
            other => Self::Metrics(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HttpMethod {
    #[serde(rename = "GET")]
    Get,
    #[serde(rename = "POST")]
    Post,
}

impl HttpMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Get => "GET",
            Self::Post => "POST",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::Get => Self::Post,
            Self::Post => Self::Get,
        }
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for HttpMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "GET" => Ok(Self::Get),
            "POST" => Ok(Self::Post),
            other => Err(format!("unsupported method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputContract {
    Labels(LabelSet),
    Score(ScoreRange),
    Neighbors,
}

/// One API service: where it is mounted and which backend answers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub route: String,
    pub method: HttpMethod,
    pub kind: BackendKind,
    pub backend_id: String,
    pub output_contract: OutputContract,
    #[serde(default)]
    pub description: String,
}

impl ServiceDescriptor {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let route_ok = !self.route.is_empty()
            && !self.route.starts_with('/')
            && !self.route.ends_with('/')
            && self
                .route
                .split('/')
                .all(|seg| !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-'));
        if !route_ok {
            return Err(RegistryError::InvalidDescriptor(format!(
                "route {:?} must be slash-separated alphanumeric segments",
                self.route
            )));
        }
        if self.backend_id.is_empty() {
            return Err(RegistryError::InvalidDescriptor("empty backend id".into()));
        }
        match (&self.kind, &self.output_contract) {
            (BackendKind::Classification, OutputContract::Labels(labels)) if !labels.is_empty() => Ok(()),
            (BackendKind::Regression, OutputContract::Score(range)) if range.low() < range.high() => Ok(()),
            (BackendKind::Retrieval, OutputContract::Neighbors) => Ok(()),
            (kind, contract) => Err(RegistryError::InvalidDescriptor(format!(
                "{kind} service cannot carry contract {contract:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfidence {
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub top_k: Vec<LabelConfidence>,
    /// Milliseconds spent inside the backend.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub score: f64,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub matches: Vec<FaceMatch>,
    pub elapsed: f64,
}

/// What a service invocation produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServiceOutput {
    Classification(ClassificationResult),
    Regression(RegressionResult),
    Retrieval(RetrievalResult),
}

impl ServiceOutput {
    pub fn elapsed(&self) -> f64 {
        match self {
            Self::Classification(r) => r.elapsed,
            Self::Regression(r) => r.elapsed,
            Self::Retrieval(r) => r.elapsed,
        }
    }
}

/// Labels ordered by descending confidence, ties by label.
pub fn rank_labels(labels: &LabelSet, distribution: &[f64]) -> Vec<LabelConfidence> {
    let mut ranked: Vec<LabelConfidence> = labels
        .iter()
        .zip(distribution)
        .map(|(label, &confidence)| LabelConfidence {
            label: label.to_string(),
            confidence,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.label.cmp(&b.label))
    });
    ranked
}

fn elapsed_ms(start: Instant) -> f64 {
    metrics::duration_ms(start.elapsed())
}

#[derive(Default)]
struct Inner {
    services: BTreeMap<String, ServiceDescriptor>,
    backends: HashMap<String, Backend>,
    indexes: HashMap<String, FaceIndex>,
}

/// Thread-safe catalog of services and backends. Cloning shares state.
#[derive(Clone, Default)]
pub struct Registry {
    inner: Arc<RwLock<Inner>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.read();
        f.debug_struct("Registry")
            .field("services", &inner.services.keys().collect::<Vec<_>>())
            .field("backends", &inner.backends.len())
            .finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_backend(&self, id: &str, backend: Backend) -> Result<(), RegistryError> {
        if id.is_empty() {
            return Err(RegistryError::InvalidDescriptor("empty backend id".into()));
        }
        let mut inner = self.inner.write();
        if inner.backends.contains_key(id) {
            return Err(RegistryError::DuplicateBackend(id.to_string()));
        }
        if let Backend::Embedder(embedder) = &backend {
            inner
                .indexes
                .insert(id.to_string(), FaceIndex::new(Arc::clone(embedder)));
        }
        inner.backends.insert(id.to_string(), backend);
        Ok(())
    }

    /// Adds a service. Its backend must already be registered with a
    /// matching kind and, for classifiers, the same label set.
    pub fn register_service(&self, descriptor: ServiceDescriptor) -> Result<(), RegistryError> {
        descriptor.validate()?;
        let mut inner = self.inner.write();
        if inner.services.contains_key(&descriptor.route) {
            return Err(RegistryError::DuplicateRoute(descriptor.route));
        }
        let backend = inner
            .backends
            .get(&descriptor.backend_id)
            .ok_or_else(|| RegistryError::UnknownBackend(descriptor.backend_id.clone()))?;
        if backend.kind() != descriptor.kind {
            return Err(RegistryError::KindMismatch {
                id: descriptor.backend_id.clone(),
                expected: descriptor.kind,
                actual: backend.kind(),
            });
        }
        match (backend, &descriptor.output_contract) {
            (Backend::Classifier(c), OutputContract::Labels(labels)) if c.labels() != labels => {
                return Err(RegistryError::InvalidDescriptor(format!(
                    "label set differs from backend {:?}",
                    descriptor.backend_id
                )));
            }
            (Backend::Regressor(r), OutputContract::Score(range)) if r.range() != *range => {
                return Err(RegistryError::InvalidDescriptor(format!(
                    "score range differs from backend {:?}",
                    descriptor.backend_id
                )));
            }
            _ => {}
        }
        inner.services.insert(descriptor.route.clone(), descriptor);
        Ok(())
    }

    pub fn lookup(&self, route: &str) -> Result<ServiceDescriptor, RegistryError> {
        self.inner
            .read()
            .services
            .get(route)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownRoute(route.to_string()))
    }

    /// All services ordered by route.
    pub fn services(&self) -> Vec<ServiceDescriptor> {
        self.inner.read().services.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.inner.read().services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.read().services.is_empty()
    }

    pub fn backend(&self, id: &str) -> Result<Backend, RegistryError> {
        self.inner
            .read()
            .backends
            .get(id)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownBackend(id.to_string()))
    }

    pub fn backend_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.read().backends.keys().cloned().collect();
        ids.sort();
        ids
    }

    fn classifier(&self, id: &str) -> Result<Arc<dyn Classifier>, RegistryError> {
        match self.backend(id)? {
            Backend::Classifier(c) => Ok(c),
            other => Err(RegistryError::KindMismatch {
                id: id.to_string(),
                expected: BackendKind::Classification,
                actual: other.kind(),
            }),
        }
    }

    fn regressor(&self, id: &str) -> Result<Arc<dyn Regressor>, RegistryError> {
        match self.backend(id)? {
            Backend::Regressor(r) => Ok(r),
            other => Err(RegistryError::KindMismatch {
                id: id.to_string(),
                expected: BackendKind::Regression,
                actual: other.kind(),
            }),
        }
    }

    pub fn face_index(&self, id: &str) -> Result<FaceIndex, RegistryError> {
        let inner = self.inner.read();
        match inner.indexes.get(id) {
            Some(index) => Ok(index.clone()),
            None => match inner.backends.get(id) {
                Some(other) => Err(RegistryError::KindMismatch {
                    id: id.to_string(),
                    expected: BackendKind::Retrieval,
                    actual: other.kind(),
                }),
                None => Err(RegistryError::UnknownBackend(id.to_string())),
            },
        }
    }

    /// Full label ranking for `image`, before truncation to top-k.
    pub fn classify_all(
        &self,
        backend_id: &str,
        image: &[u8],
    ) -> Result<Vec<LabelConfidence>, RegistryError> {
        let classifier = self.classifier(backend_id)?;
        if image.is_empty() {
            return Err(RegistryError::EmptyInput);
        }
        Ok(rank_labels(classifier.labels(), &classifier.distribution(image)))
    }

    pub fn classify(
        &self,
        backend_id: &str,
        image: &[u8],
        k: usize,
    ) -> Result<ClassificationResult, RegistryError> {
        let start = Instant::now();
        let classifier = self.classifier(backend_id)?;
        if image.is_empty() {
            return Err(RegistryError::EmptyInput);
        }
        let available = classifier.labels().len();
        if k == 0 || k > available {
            return Err(RegistryError::InvalidTopK { k, available });
        }
        let mut top_k = rank_labels(classifier.labels(), &classifier.distribution(image));
        top_k.truncate(k);
        Ok(ClassificationResult {
            top_k,
            elapsed: elapsed_ms(start),
        })
    }

    pub fn score(&self, backend_id: &str, input: &[u8]) -> Result<RegressionResult, RegistryError> {
        let start = Instant::now();
        let regressor = self.regressor(backend_id)?;
        if input.is_empty() {
            return Err(RegistryError::EmptyInput);
        }
        let score = regressor.range().clamp(regressor.predict(input));
        Ok(RegressionResult {
            score,
            elapsed: elapsed_ms(start),
        })
    }

    pub fn enroll_face(
        &self,
        backend_id: &str,
        person_id: &str,
        image: &[u8],
    ) -> Result<(), RegistryError> {
        self.face_index(backend_id)?.enroll(person_id, image)
    }

    pub fn search_face(
        &self,
        backend_id: &str,
        image: &[u8],
        k: usize,
    ) -> Result<RetrievalResult, RegistryError> {
        let start = Instant::now();
        let matches = self.face_index(backend_id)?.search(image, k)?;
        Ok(RetrievalResult {
            matches,
            elapsed: elapsed_ms(start),
        })
    }

    /// Runs the service mounted at `route` with its default `k`.
    pub fn invoke(&self, route: &str, input: &[u8]) -> Result<ServiceOutput, RegistryError> {
        let service = self.lookup(route)?;
        match service.kind {
            BackendKind::Classification => self
                .classify(&service.backend_id, input, DEFAULT_CLASSIFY_K)
                .map(ServiceOutput::Classification),
            BackendKind::Regression => self
                .score(&service.backend_id, input)
                .map(ServiceOutput::Regression),
            BackendKind::Retrieval => self
                .search_face(&service.backend_id, input, DEFAULT_SEARCH_K)
                .map(ServiceOutput::Retrieval),
        }
    }

    /// Feeds `inputs` to the backend in one call. Used by the throughput
    /// benchmark; returns the number of outputs produced.
    pub fn invoke_batch(&self, backend_id: &str, inputs: &[&[u8]]) -> Result<usize, RegistryError> {
        if inputs.iter().any(|i| i.is_empty()) {
            return Err(RegistryError::EmptyInput);
        }
        Ok(match self.backend(backend_id)? {
            Backend::Classifier(c) => c.distribution_batch(inputs).len(),
            Backend::Regressor(r) => r.predict_batch(inputs).len(),
            Backend::Embedder(e) => e.embed_batch(inputs).len(),
        })
    }
}
