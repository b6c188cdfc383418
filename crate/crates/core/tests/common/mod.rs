//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use infergate::gateway::{spawn_server, Gateway, Limits, RouterOptions, RunningServer};
use infergate::persistence::{NewUser, RegisterType, Store};
use infergate::registry::Registry;
use tempfile::TempDir;

pub const ALICE_KEY: &str = "alice-key-0001";
pub const BOB_KEY: &str = "bob-key-0002";

pub fn new_user(username: &str, userkey: &str) -> NewUser {
    NewUser {
        username: username.into(),
        register_type: RegisterType::WebForm,
        user_organization: "Test Lab".into(),
        email: format!("{username}@example.org"),
        userkey: userkey.into(),
        credential: "s3cret".into(),
    }
}

/// Store in a fresh temporary directory holding users alice and bob.
pub fn seeded_store() -> (Arc<Store>, TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.create_user(&new_user("alice", ALICE_KEY)).unwrap();
    store.create_user(&new_user("bob", BOB_KEY)).unwrap();
    (Arc::new(store), dir)
}

/// Deterministic pseudo-image bytes.
pub fn image(seed: u64, len: usize) -> Vec<u8> {
    let mut state = seed;
    (0..len)
        .map(|_| {
            state = infergate::registry::splitmix64(state);
            state as u8
        })
        .collect()
}

pub struct TestServer {
    pub server: RunningServer,
    pub dir: TempDir,
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.server.base_url(), path)
    }

    pub fn gateway(&self) -> &Gateway {
        self.server.gateway()
    }
}

/// Gateway with `workers` local workers over `registry`, on an ephemeral port.
pub async fn start_with(registry: Registry, workers: usize, options: RouterOptions) -> TestServer {
    let (store, dir) = seeded_store();
    let gateway = Gateway::with_local_workers(registry, store, workers, Limits::default());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let server = spawn_server(listener, gateway, options, None).await.unwrap();
    TestServer { server, dir }
}

pub async fn start_stock() -> TestServer {
    start_with(infergate::catalog::stock_registry(), 2, RouterOptions::default()).await
}
