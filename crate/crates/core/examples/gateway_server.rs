//! Run the HTTP gateway over the stock catalog.
//!
//! Configuration comes from flags, then `INFERGATE_*` environment variables,
//! then defaults (see `--help`). A demo account with key `demo-key` is
//! created on first start.
//!
//! ```sh
//! cargo run --example gateway_server -- --listen 127.0.0.1:8080 --workers local,local
//! curl -H 'x-api-key: demo-key' 'http://127.0.0.1:8080/api/dm/zhihuliveeval?id=12345'
//! curl -H 'x-api-key: demo-key' -H 'content-type: application/json' \
//!      -d "{\"imgraw\":\"$(base64 -w0 photo.jpg)\"}" http://127.0.0.1:8080/api/cv/plant
//! ```

use clap::Parser;
use infergate::catalog::stock_registry;
use infergate::gateway::{start, GatewayConfig};
use infergate::persistence::{NewUser, PersistenceError, RegisterType, Store};

const DEMO_KEY: &str = "demo-key";

fn seed_demo_user(config: &GatewayConfig) -> Result<(), PersistenceError> {
    std::fs::create_dir_all(&config.data_dir)?;
    let store = Store::open(&config.data_dir)?;
    let demo = NewUser {
        username: "demo".into(),
        register_type: RegisterType::AdminCreated,
        user_organization: "local".into(),
        email: "demo@localhost".into(),
        userkey: DEMO_KEY.into(),
        credential: "demo".into(),
    };
    match store.lookup_user(&demo.username) {
        Ok(_) => {}
        Err(PersistenceError::NotFound) => {
            store.create_user(&demo)?;
        }
        Err(e) => return Err(e),
    }
    store.close()
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let config = GatewayConfig::parse();
    seed_demo_user(&config)?;

    let server = start(&config, stock_registry()).await?;
    println!("listening on {} (api prefix {})", server.base_url(), config.normalized_prefix());
    println!("demo key: {DEMO_KEY}");
    tokio::signal::ctrl_c().await?;
    println!("shutting down");
    server.shutdown().await?;
    Ok(())
}
