//! Start a gateway in-process and stress every route at a fixed rate.
//!
//! ```sh
//! cargo run --release --example stress_local -- 20 10   # 20 QPS for 10 s
//! ```

use std::sync::Arc;
use std::time::Duration;

use infergate::catalog::{stock_registry, FACE_BACKEND, ROUTES};
use infergate::gateway::{spawn_server, Gateway, Limits, RouterOptions};
use infergate::loadgen::{render_report, run_stress, Payload, StopCondition, StressPlan, StressTarget};
use infergate::persistence::{NewUser, RegisterType, Store};
use infergate::registry::HttpMethod;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let qps: f64 = args.next().map_or(Ok(20.0), |a| a.parse())?;
    let secs: f64 = args.next().map_or(Ok(10.0), |a| a.parse())?;

    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path())?;
    store.create_user(&NewUser {
        username: "loadtest".into(),
        register_type: RegisterType::AdminCreated,
        user_organization: "local".into(),
        email: "load@localhost".into(),
        userkey: "load-key".into(),
        credential: "x".into(),
    })?;
    let registry = stock_registry();
    registry.enroll_face(FACE_BACKEND, "someone", b"an enrolled portrait")?;
    let gateway = Gateway::with_local_workers(registry, Arc::new(store), 2, Limits::default());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let server = spawn_server(listener, gateway, RouterOptions::default(), None).await?;

    let targets = ROUTES
        .iter()
        .map(|(route, method, _)| match method {
            HttpMethod::Post => StressTarget::new(*route, Payload::imgraw_bytes(&[7u8; 4096])),
            HttpMethod::Get => StressTarget::new(*route, Payload::Id("12345".into())),
        })
        .collect();
    let mut plan = StressPlan::new(
        server.base_url().parse()?,
        "load-key",
        targets,
        StopCondition::Duration(Duration::from_secs_f64(secs)),
    );
    plan.target_qps = Some(qps);
    plan.virtual_users = 4;

    let report = run_stress(&plan).await?;
    print!("{}", render_report(&report));
    println!(
        "{} requests in {:.2} s, {:.2} QPS achieved, {} errors",
        report.attempts(),
        report.wall_time().as_secs_f64(),
        report.achieved_qps(),
        report.errors()
    );
    server.shutdown().await?;
    Ok(())
}
