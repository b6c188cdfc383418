mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::routing::post;
use axum::Router;
use common::ALICE_KEY;
use infergate::loadgen::{
    parse_report, render_report, run_stress, run_with_transport, warmup_len, FnTransport, LoadgenError, Payload,
    Sample, StopCondition, StressPlan, StressTarget,
};
use infergate::metrics::summarize_latencies;
use url::Url;

fn plan(base: &str, targets: Vec<StressTarget>, stop: StopCondition) -> StressPlan {
    StressPlan::new(Url::parse(base).unwrap(), ALICE_KEY, targets, stop)
}

#[test]
fn warmup_rule() {
    assert_eq!(warmup_len(0), 0);
    assert_eq!(warmup_len(1), 0);
    assert_eq!(warmup_len(3), 2);
    assert_eq!(warmup_len(10), 5);
    assert_eq!(warmup_len(100), 5);
    assert_eq!(warmup_len(101), 6);
    assert_eq!(warmup_len(10_000), 500);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn constant_delay_handler_is_measured() {
    let app = Router::new().route(
        "/api/slow",
        // Thread sleep: the async timer rounds up to whole milliseconds.
        post(|| async {
            std::thread::sleep(Duration::from_millis(5));
            "{}"
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let mut p = plan(&base, vec![StressTarget::new("slow", Payload::ImgRaw("YWJj".into()))], StopCondition::TotalRequests(10));
    p.virtual_users = 1;
    let report = run_stress(&p).await.unwrap();
    let row = &report.rows()[0];
    assert_eq!((row.error_count, row.sample_count, report.attempts()), (0, 10, 10));
    assert!((2.5..=7.5).contains(&row.avg_latency), "{row:?}");
}

#[tokio::test]
async fn closed_port_is_unreachable() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let p = plan(&base, vec![StressTarget::new("cv/fbp", Payload::Id("1".into()))], StopCondition::TotalRequests(1));
    assert!(matches!(run_stress(&p).await, Err(LoadgenError::TargetUnreachable(_))));
}

#[tokio::test]
async fn successes_plus_errors_equal_attempts() {
    let ts = common::start_stock().await;
    let targets = vec![
        StressTarget::new("cv/fbp", Payload::imgraw_bytes(b"portrait")),
        StressTarget::new("dm/zhihuliveeval", Payload::Id("7".into())),
        StressTarget::new("cv/food", Payload::ImgRaw("***".into())),
    ];
    let mut p = plan(&ts.server.base_url(), targets, StopCondition::TotalRequests(90));
    p.virtual_users = 6;
    let report = run_stress(&p).await.unwrap();
    assert_eq!(report.attempts(), 90);
    assert_eq!(report.successes() + report.errors(), 90);
    let by_route: Vec<_> = report.rows().iter().map(|r| (r.api.as_str(), r.sample_count, r.error_count)).collect();
    assert_eq!(by_route, [("cv/fbp", 30, 0), ("dm/zhihuliveeval", 30, 0), ("cv/food", 0, 30)]);
    let parsed = parse_report(&render_report(&report)).unwrap();
    assert_eq!(parsed.len(), 3);
    assert_eq!((parsed[2].avg_latency_ms, parsed[2].errors), (None, 30));
    assert!((report.achieved_qps() - 60.0 / report.wall_time().as_secs_f64()).abs() < 1e-9);
}

#[tokio::test]
async fn injected_latencies_aggregate_losslessly() {
    let latencies: Arc<Vec<Duration>> = Arc::new((0..2000u64).map(|i| Duration::from_micros((i * 7919) % 50_000 + 1)).collect());
    let script = Arc::clone(&latencies);
    let transport = Arc::new(FnTransport::new(move |_, seq| Sample {
        latency: script[seq as usize],
        ok: true,
    }));
    let mut p = plan("http://127.0.0.1:9", vec![StressTarget::new("cv/fbp", Payload::Id("1".into()))], StopCondition::TotalRequests(2000));
    p.targets[0].method = infergate::registry::HttpMethod::Get;
    p.virtual_users = 8;
    let report = run_with_transport(&p, transport).await.unwrap();
    let w = warmup_len(2000);
    let oracle = summarize_latencies("cv/fbp", &latencies[w..], 0).unwrap();
    let row = &report.rows()[0];
    assert_eq!(row.avg_latency, oracle.avg_latency);
    assert_eq!(row.p99, oracle.p99);
    assert_eq!(row.sample_count, 2000);
}

#[tokio::test]
async fn pacing_spreads_requests() {
    let transport = Arc::new(FnTransport::new(|_, _| Sample { latency: Duration::from_millis(1), ok: true }));
    let mut p = plan("http://127.0.0.1:9", vec![StressTarget::new("dm/x", Payload::Id("1".into()))], StopCondition::Duration(Duration::from_secs(1)));
    p.target_qps = Some(50.0);
    p.virtual_users = 2;
    let report = run_with_transport(&p, transport).await.unwrap();
    assert_eq!(report.attempts(), 50);
    assert!(report.wall_time() >= Duration::from_millis(980), "{:?}", report.wall_time());
}

#[test]
fn cli_runs_a_plan_file() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let ts = rt.block_on(common::start_stock());
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("face.bin"), common::image(3, 128)).unwrap();
    let plan_path = dir.path().join("plan.toml");
    let out_path = dir.path().join("report.txt");
    let write_plan = |extra: &str| {
        std::fs::write(
            &plan_path,
            format!(
                "base_url = \"{}\"\nuser_key = \"{ALICE_KEY}\"\nrequests = 40\nusers = 4\n\
                 [[target]]\nroute = \"cv/fbp\"\nimgraw_file = \"face.bin\"\n\
                 [[target]]\nroute = \"dm/zhihuliveeval\"\nid = \"12345\"\n{extra}",
                ts.server.base_url()
            ),
        )
        .unwrap();
    };
    let stress = env!("CARGO_BIN_EXE_stress");

    write_plan("");
    let out = std::process::Command::new(stress)
        .args(["run", "--plan"])
        .arg(&plan_path)
        .args(["--requests", "20", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rows = parse_report(&stdout).unwrap();
    assert_eq!(rows.iter().map(|r| r.api.as_str()).collect::<Vec<_>>(), ["cv/fbp", "dm/zhihuliveeval"]);
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), stdout);

    write_plan("[[target]]\nroute = \"cv/food\"\nimgraw = \"***\"\n");
    let out = std::process::Command::new(stress)
        .args(["run", "--format", "csv", "--plan"])
        .arg(&plan_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("api,avg_latency_ms,p99_ms,error\n"));
    assert!(csv.contains("cv/food,,,13\n"), "{csv}");

    let missing = std::process::Command::new(stress).args(["run", "--plan", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
