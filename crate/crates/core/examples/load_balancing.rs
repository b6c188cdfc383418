//! A front gateway balancing across two worker gateways over HTTP, with
//! health probes taking a stopped worker out of rotation.
//!
//! ```sh
//! cargo run --example load_balancing
//! ```

use std::sync::Arc;
use std::time::Duration;

use axum::http::Method;
use infergate::catalog::stock_registry;
use infergate::gateway::input::encode_imgraw;
use infergate::gateway::{
    parse_worker_spec, spawn_server, ApiRequest, Gateway, HealthThresholds, Limits, Params, RouterOptions,
    RunningServer, WorkerPool,
};
use infergate::persistence::{NewUser, RegisterType, Store};

async fn worker_gateway(dir: &std::path::Path) -> Result<RunningServer, Box<dyn std::error::Error>> {
    let store = Arc::new(Store::open(dir)?);
    let gateway = Gateway::with_local_workers(stock_registry(), store, 1, Limits::default());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let options = RouterOptions {
        worker_token: Some("shared-secret".into()),
        ..RouterOptions::default()
    };
    Ok(spawn_server(listener, gateway, options, None).await?)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?, tempfile::tempdir()?];
    let w0 = worker_gateway(dirs[0].path()).await?;
    let w1 = worker_gateway(dirs[1].path()).await?;

    let registry = stock_registry();
    let client = reqwest::Client::new();
    let workers = [w0.base_url(), w1.base_url()]
        .iter()
        .enumerate()
        .map(|(i, url)| parse_worker_spec(url, i, &registry, &client, Some("shared-secret")))
        .collect::<Result<Vec<_>, _>>()?;
    let store = Arc::new(Store::open(dirs[2].path())?);
    store.create_user(&NewUser {
        username: "demo".into(),
        register_type: RegisterType::AdminCreated,
        user_organization: "local".into(),
        email: "demo@localhost".into(),
        userkey: "demo-key".into(),
        credential: "x".into(),
    })?;
    let front = Gateway::new(registry, store, WorkerPool::new(workers, HealthThresholds::default()), Limits::default());

    let request = || ApiRequest::new("cv/pdr", Method::POST, Some("demo-key"), Params::imgraw(encode_imgraw(b"leaf")));
    for _ in 0..4 {
        let resp = front.route_request(request()).await;
        println!("status {} results {}", resp.status, resp.results.unwrap_or_default());
    }

    println!("stopping worker 1");
    w1.shutdown().await?;
    for round in 1..=3 {
        let statuses = front.health_check(Duration::from_millis(200)).await;
        println!("probe round {round}: {statuses:?}");
    }
    for _ in 0..2 {
        let resp = front.route_request(request()).await;
        println!("status {} ({})", resp.status, resp.message);
    }
    w0.shutdown().await?;
    Ok(())
}
