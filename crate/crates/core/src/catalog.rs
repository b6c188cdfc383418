//! The stock service catalog: eight routes backed by synthetic stubs.

use std::time::Duration;

use crate::registry::{
    Backend, BackendKind, HistogramEmbedder, HttpMethod, LabelSet, OutputContract, Registry,
    RegistryError, ScoreRange, ServiceDescriptor, SimulatedCost, StubClassifier, StubRegressor,
};

/// `(route, method, description)` for every stock API.
pub const ROUTES: [(&str, HttpMethod, &str); 8] = [
    ("cv/mcloud/skin", HttpMethod::Post, "skin disease recognition"),
    ("cv/fbp", HttpMethod::Post, "facial beauty prediction"),
    ("cv/nsfw", HttpMethod::Post, "pornography image recognition"),
    ("cv/pdr", HttpMethod::Post, "plant disease recognition"),
    ("cv/food", HttpMethod::Post, "food recognition"),
    ("cv/plant", HttpMethod::Post, "plant recognition"),
    ("cv/facesearch", HttpMethod::Post, "face retrieval"),
    ("dm/zhihuliveeval", HttpMethod::Get, "Zhihu Live rating"),
];

pub const FACE_BACKEND: &str = "face";

enum Spec {
    Labels(LabelSet),
    Range(f64, f64),
    Faces,
}

fn backend_for(route: &str) -> Result<(&'static str, Spec), RegistryError> {
    Ok(match route {
        "cv/mcloud/skin" => ("skin", Spec::Labels(LabelSet::numbered("skin_disease", 198)?)),
        "cv/fbp" => ("fbp", Spec::Range(1.0, 5.0)),
        "cv/nsfw" => (
            "nsfw",
            Spec::Labels(LabelSet::new(["drawings", "hentai", "neutral", "porn", "sexy"])?),
        ),
        "cv/pdr" => ("pdr", Spec::Labels(LabelSet::numbered("plant_disease", 61)?)),
        "cv/food" => ("food", Spec::Labels(LabelSet::numbered("food", 251)?)),
        "cv/plant" => ("plant", Spec::Labels(LabelSet::numbered("plant", 998)?)),
        "cv/facesearch" => (FACE_BACKEND, Spec::Faces),
        "dm/zhihuliveeval" => ("zhihulive", Spec::Range(0.0, 5.0)),
        other => return Err(RegistryError::UnknownRoute(other.to_string())),
    })
}

/// Per-invocation cost charged by simulated backends: a fixed overhead per
/// call plus a cost per input item.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCost {
    pub per_call: Duration,
    pub per_item: Duration,
}

/// Registers the stub backend and service for each entry of [`ROUTES`].
pub fn register_stock_services(registry: &Registry) -> Result<(), RegistryError> {
    register_catalog(registry, None)
}

/// Like [`register_stock_services`], with every backend charging `cost`.
pub fn register_simulated_services(registry: &Registry, cost: CallCost) -> Result<(), RegistryError> {
    register_catalog(registry, Some(cost))
}

fn register_catalog(registry: &Registry, cost: Option<CallCost>) -> Result<(), RegistryError> {
    for (route, method, description) in ROUTES {
        let (backend_id, spec) = backend_for(route)?;
        let (backend, kind, contract) = match spec {
            Spec::Labels(labels) => {
                let stub = StubClassifier::new(labels.clone());
                (
                    match cost {
                        Some(c) => Backend::classifier(SimulatedCost::new(stub, c.per_call, c.per_item)),
                        None => Backend::classifier(stub),
                    },
                    BackendKind::Classification,
                    OutputContract::Labels(labels),
                )
            }
            Spec::Range(low, high) => {
                let range = ScoreRange::new(low, high)?;
                let stub = StubRegressor::new(range);
                (
                    match cost {
                        Some(c) => Backend::regressor(SimulatedCost::new(stub, c.per_call, c.per_item)),
                        None => Backend::regressor(stub),
                    },
                    BackendKind::Regression,
                    OutputContract::Score(range),
                )
            }
            Spec::Faces => (
                match cost {
                    Some(c) => Backend::embedder(SimulatedCost::new(HistogramEmbedder, c.per_call, c.per_item)),
                    None => Backend::embedder(HistogramEmbedder),
                },
                BackendKind::Retrieval,
                OutputContract::Neighbors,
            ),
        };
        registry.register_backend(backend_id, backend)?;
        registry.register_service(ServiceDescriptor {
            route: route.to_string(),
            method,
            kind,
            backend_id: backend_id.to_string(),
            output_contract: contract,
            description: description.to_string(),
        })?;
    }
    Ok(())
}

/// Fresh registry holding the stock catalog.
pub fn stock_registry() -> Registry {
    let registry = Registry::new();
    register_stock_services(&registry).expect("stock catalog is valid");
    registry
}

/// Fresh registry holding the stock catalog with every backend charging `cost`.
pub fn simulated_registry(cost: CallCost) -> Registry {
    let registry = Registry::new();
    register_simulated_services(&registry, cost).expect("stock catalog is valid");
    registry
}
