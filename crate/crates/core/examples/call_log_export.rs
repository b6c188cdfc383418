//! Every authenticated API call is logged; query the log and export it as CSV.
//!
//! ```sh
//! cargo run --example call_log_export > calls.csv
//! ```

use std::sync::Arc;

use axum::http::Method;
use infergate::catalog::stock_registry;
use infergate::gateway::input::encode_imgraw;
use infergate::gateway::{ApiRequest, Gateway, Limits, Params};
use infergate::persistence::{CallFilter, NewUser, RegisterType, Store, TerminalType};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = Arc::new(Store::open(dir.path())?);
    for (name, key) in [("alice", "alice-key"), ("bob", "bob-key")] {
        store.create_user(&NewUser {
            username: name.into(),
            register_type: RegisterType::WebForm,
            user_organization: "Example Lab".into(),
            email: format!("{name}@example.org"),
            userkey: key.into(),
            credential: "pw".into(),
        })?;
    }
    let gateway = Gateway::with_local_workers(stock_registry(), Arc::clone(&store), 2, Limits::default());

    let photo = encode_imgraw(b"a bowl of ramen");
    let calls = [
        ApiRequest::new("cv/food", Method::POST, Some("alice-key"), Params::imgraw(photo.clone())),
        ApiRequest::new("cv/food", Method::POST, Some("bob-key"), Params::imgraw(photo.clone()))
            .with_terminal(TerminalType::Android),
        ApiRequest::new("dm/zhihuliveeval", Method::GET, Some("alice-key"), Params::id("42")),
        ApiRequest::new("cv/food", Method::GET, Some("alice-key"), Params::imgraw(photo)), // 405, still logged
        ApiRequest::new("cv/food", Method::POST, None, Params::default()), // 401, not logged
    ];
    for call in calls {
        let resp = gateway.route_request(call).await;
        eprintln!("status {:>2}: {}", resp.status, resp.message);
    }
    gateway.flush_logs().await;

    let alice = store.query_calls(&CallFilter::for_user("alice", 10))?;
    eprintln!("alice has {} logged calls, newest first:", alice.len());
    for r in &alice {
        eprintln!("  {} {:<18} {:.3} ms", r.api_call_datetime, r.api_name, r.api_elapse);
    }
    store.export_calls_csv(std::io::stdout().lock())?;
    Ok(())
}
