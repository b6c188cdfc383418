mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use axum::routing::get;
use axum::Router;
use common::{ALICE_KEY, BOB_KEY};
use infergate::catalog::{stock_registry, ROUTES};
use infergate::gateway::input::encode_imgraw;
use infergate::gateway::{
    parse_worker_spec, spawn_server, ApiRequest, ApiResponse, Gateway, HealthStatus, HealthThresholds, Limits,
    Params, RouterOptions, WorkerPool,
};
use infergate::persistence::CallFilter;
use infergate::registry::HttpMethod;
use serde_json::{json, Value};

async fn call(
    client: &reqwest::Client,
    url: &str,
    method: Method,
    key: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, ApiResponse) {
    let mut req = client.request(method, url);
    if let Some(key) = key {
        req = req.header("x-api-key", key);
    }
    if let Some(body) = body {
        req = req.json(&body);
    }
    let resp = req.send().await.unwrap();
    let status = resp.status();
    let parsed: ApiResponse = resp.json().await.unwrap();
    (status, parsed)
}

fn valid_body(method: HttpMethod) -> (Option<Value>, &'static str) {
    match method {
        HttpMethod::Post => (Some(json!({ "imgraw": encode_imgraw(&common::image(1, 256)) })), ""),
        HttpMethod::Get => (None, "?id=12345"),
    }
}

fn to_method(m: HttpMethod) -> Method {
    match m {
        HttpMethod::Get => Method::GET,
        HttpMethod::Post => Method::POST,
    }
}

#[tokio::test]
async fn every_route_accepts_its_method_and_rejects_the_other() {
    let ts = common::start_stock().await;
    ts.gateway().registry().enroll_face("face", "ann", &common::image(1, 256)).unwrap();
    let client = reqwest::Client::new();
    for (route, method, _) in ROUTES {
        let (body, query) = valid_body(method);
        let url = ts.url(&format!("/api/{route}{query}"));
        let (status, resp) = call(&client, &url, to_method(method), Some(ALICE_KEY), body.clone()).await;
        assert_eq!(status, StatusCode::OK, "{route}: {resp:?}");
        assert!(resp.is_ok() && resp.results.is_some(), "{route}");
        let (status, resp) = call(&client, &url, to_method(method.other()), Some(ALICE_KEY), body).await;
        assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED, "{route}");
        assert_eq!(resp.status, -4);
    }
    let (status, resp) = call(&client, &ts.url("/api/cv/nothing"), Method::POST, Some(ALICE_KEY), None).await;
    assert_eq!((status, resp.status), (StatusCode::NOT_FOUND, -3));
    let (status, _) = call(&client, &ts.url("/elsewhere"), Method::GET, Some(ALICE_KEY), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn result_shapes() {
    let ts = common::start_stock().await;
    let client = reqwest::Client::new();
    let (_, r) = call(&client, &ts.url("/api/dm/zhihuliveeval?id=12345"), Method::GET, Some(ALICE_KEY), None).await;
    assert_eq!(r.results, Some(json!({ "score": 1.809_499_999_999_999_9 })));
    let img = common::image(5, 300);
    let (_, r) = call(&client, &ts.url("/api/cv/nsfw"), Method::POST, Some(ALICE_KEY), Some(json!({"imgraw": encode_imgraw(&img)}))).await;
    let top = &r.results.unwrap()[0];
    let peak = ["drawings", "hentai", "neutral", "porn", "sexy"][img.iter().map(|&b| b as usize).sum::<usize>() % 5];
    assert_eq!(top["label"], peak);
    assert!(top["confidence"].as_f64().unwrap() > 0.5);

    // Form-encoded bodies are accepted too.
    let resp = client
        .post(ts.url("/api/cv/nsfw"))
        .header("x-api-key", ALICE_KEY)
        .header("content-type", "application/x-www-form-urlencoded")
        .body(
            url::form_urlencoded::Serializer::new(String::new())
                .append_pair("imgraw", &encode_imgraw(&img))
                .finish(),
        )
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);

    let (status, r) = call(&client, &ts.url("/api/cv/facesearch"), Method::POST, Some(ALICE_KEY), Some(json!({"imgraw": encode_imgraw(&img)}))).await;
    assert_eq!((status, r.status), (StatusCode::CONFLICT, -7));
}

#[tokio::test]
async fn authentication_and_parameter_errors() {
    let ts = common::start_stock().await;
    let client = reqwest::Client::new();
    let url = ts.url("/api/cv/fbp");
    let good = Some(json!({ "imgraw": encode_imgraw(b"face") }));
    let cases: Vec<(Option<&str>, Option<Value>, StatusCode, i32)> = vec![
        (None, good.clone(), StatusCode::UNAUTHORIZED, -2),
        (Some("wrong-key"), good.clone(), StatusCode::UNAUTHORIZED, -2),
        (Some(""), good.clone(), StatusCode::UNAUTHORIZED, -2),
        (Some(ALICE_KEY), Some(json!({ "imgraw": "***not base64***" })), StatusCode::BAD_REQUEST, -1),
        (Some(ALICE_KEY), Some(json!({ "imgraw": "" })), StatusCode::BAD_REQUEST, -1),
        (Some(ALICE_KEY), Some(json!({})), StatusCode::BAD_REQUEST, -1),
        (Some(ALICE_KEY), Some(json!({ "imgraw": "YWJj", "imgurl": "http://x/" })), StatusCode::BAD_REQUEST, -1),
        (Some(ALICE_KEY), Some(json!({ "imgraw": 17 })), StatusCode::BAD_REQUEST, -1),
        (Some(ALICE_KEY), Some(json!({ "imgurl": "ftp://x/a.png" })), StatusCode::BAD_REQUEST, -1),
    ];
    for (key, body, status, code) in cases {
        let (s, r) = call(&client, &url, Method::POST, key, body.clone()).await;
        assert_eq!((s, r.status), (status, code), "{key:?} {body:?}: {r:?}");
        assert!(r.results.is_none() && !r.message.is_empty());
    }
    let (s, _) = call(&client, &ts.url("/api/dm/zhihuliveeval"), Method::GET, Some(ALICE_KEY), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let long_id = "9".repeat(300);
    let (s, _) = call(&client, &ts.url(&format!("/api/dm/zhihuliveeval?id={long_id}")), Method::GET, Some(ALICE_KEY), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let resp = client
        .post(&url)
        .header("x-api-key", ALICE_KEY)
        .header("x-terminal-type", "7")
        .json(&good)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

async fn image_host() -> (String, tokio::task::JoinHandle<()>) {
    let kib: Vec<u8> = common::image(77, 1024);
    let app = Router::new()
        .route("/img.png", get(move || async move { kib.clone() }))
        .route("/big.png", get(|| async { vec![0u8; 4096] }));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let handle = tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (base, handle)
}

#[tokio::test]
async fn image_urls_are_fetched_with_limits() {
    let (host, _h) = image_host().await;
    let (store, _dir) = common::seeded_store();
    let limits = Limits {
        max_image_bytes: 2048,
        fetch_timeout: Duration::from_millis(300),
        ..Limits::default()
    };
    let gateway = Gateway::with_local_workers(stock_registry(), store, 1, limits);
    let post = |params: Params| ApiRequest::new("cv/plant", Method::POST, Some(ALICE_KEY), params);

    let by_url = gateway.route_request(post(Params::imgurl(format!("{host}/img.png")))).await;
    let by_raw = gateway.route_request(post(Params::imgraw(encode_imgraw(&common::image(77, 1024))))).await;
    assert!(by_url.is_ok(), "{by_url:?}");
    assert_eq!(by_url.results, by_raw.results);

    let missing = gateway.route_request(post(Params::imgurl(format!("{host}/missing.png")))).await;
    assert_eq!((missing.status, missing.http_status), (-5, 502));
    let too_big = gateway.route_request(post(Params::imgurl(format!("{host}/big.png")))).await;
    assert_eq!(too_big.status, -5);

    // Non-routable address: bounded by the fetch timeout.
    let start = Instant::now();
    let dead = gateway.route_request(post(Params::imgurl("http://10.255.255.1/x.png"))).await;
    assert_eq!(dead.status, -5);
    assert!(start.elapsed() < Duration::from_secs(3), "{:?}", start.elapsed());

    gateway.flush_logs().await;
    let rows = gateway.store().query_calls(&CallFilter::latest(10)).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().any(|r| r.img_path == format!("{host}/img.png")));
    assert!(rows.iter().any(|r| r.img_path.starts_with("imgraw:")));
}

#[tokio::test]
async fn every_authenticated_request_is_logged_once() {
    let ts = common::start_stock().await;
    let client = reqwest::Client::new();
    let mut expected_alice = 0;
    for i in 0..40 {
        let (route, method, _) = ROUTES[i % ROUTES.len()];
        let (body, query) = valid_body(method);
        let url = ts.url(&format!("/api/{route}{query}"));
        let key = match i % 4 {
            0 => None,
            1 => Some(BOB_KEY),
            _ => Some(ALICE_KEY),
        };
        let m = if i % 5 == 0 { method.other() } else { method };
        let start = Instant::now();
        let (_, r) = call(&client, &url, to_method(m), key, body).await;
        assert!(r.elapse >= 0.0 && r.elapse <= start.elapsed().as_secs_f64() * 1000.0);
        if key == Some(ALICE_KEY) {
            expected_alice += 1;
        }
    }
    ts.gateway().flush_logs().await;
    let store = ts.gateway().store();
    assert_eq!(store.count_calls().unwrap(), 30);
    assert_eq!(store.query_calls(&CallFilter::for_user("alice", 100)).unwrap().len(), expected_alice);

    // The call-log endpoint shows only the caller's rows, newest first.
    let (status, r) = call(&client, &ts.url("/calls?limit=5&api_name=cv/fbp"), Method::GET, Some(BOB_KEY), None).await;
    assert_eq!(status, StatusCode::OK);
    let rows = r.results.unwrap();
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty() && rows.len() <= 5);
    assert!(rows.iter().all(|row| row["username"] == "bob" && row["api_name"] == "cv/fbp"));
    let (status, _) = call(&client, &ts.url("/calls"), Method::GET, None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&client, &ts.url("/calls?limit=0"), Method::GET, Some(BOB_KEY), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(store.count_calls().unwrap(), 30);
}

#[tokio::test]
async fn health_and_console_endpoints() {
    let console = tempfile::tempdir().unwrap();
    std::fs::write(console.path().join("index.html"), "<h1>console</h1>").unwrap();
    let options = RouterOptions {
        console_dir: Some(console.path().to_path_buf()),
        ..RouterOptions::default()
    };
    let ts = common::start_with(stock_registry(), 1, options).await;
    let health = reqwest::get(ts.url("/healthz")).await.unwrap();
    assert_eq!(health.status(), StatusCode::OK);
    let page = reqwest::get(ts.url("/console/index.html")).await.unwrap();
    assert_eq!(page.status(), StatusCode::OK);
    assert_eq!(page.text().await.unwrap(), "<h1>console</h1>");
}

#[tokio::test]
async fn remote_workers_round_trip() {
    let worker = common::start_with(
        stock_registry(),
        1,
        RouterOptions { worker_token: Some("tok".into()), ..RouterOptions::default() },
    )
    .await;
    let client = reqwest::Client::new();
    let registry = stock_registry();
    let build = |token: Option<&str>| {
        let (store, dir) = common::seeded_store();
        let remote = parse_worker_spec(&worker.server.base_url(), 0, &registry, &client, token).unwrap();
        let pool = WorkerPool::new(vec![remote], HealthThresholds::default());
        (Gateway::new(registry.clone(), store, pool, Limits::default()), dir)
    };
    let request = || ApiRequest::new("cv/food", Method::POST, Some(ALICE_KEY), Params::imgraw(encode_imgraw(b"noodles")));

    let (front, _d1) = build(Some("tok"));
    let remote = front.route_request(request()).await;
    let local = Gateway::with_local_workers(registry.clone(), common::seeded_store().0, 1, Limits::default())
        .route_request(request())
        .await;
    assert!(remote.is_ok(), "{remote:?}");
    assert_eq!(remote.results, local.results);

    let (bad_token, _d2) = build(Some("nope"));
    let denied = bad_token.route_request(request()).await;
    assert_eq!((denied.status, denied.http_status), (-8, 502));
}

#[tokio::test]
async fn probes_apply_hysteresis() {
    let up = Arc::new(AtomicBool::new(true));
    let flag = Arc::clone(&up);
    let app = Router::new().route(
        "/healthz",
        get(move || {
            let flag = Arc::clone(&flag);
            async move {
                if flag.load(Ordering::SeqCst) {
                    StatusCode::OK
                } else {
                    StatusCode::SERVICE_UNAVAILABLE
                }
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let registry = stock_registry();
    let client = reqwest::Client::new();
    let remote = parse_worker_spec(&base, 0, &registry, &client, None).unwrap();
    let pool = WorkerPool::new(vec![remote], HealthThresholds::default());
    let (store, _dir) = common::seeded_store();
    let gateway = Gateway::new(registry, store, pool, Limits::default());
    let probe = Duration::from_millis(500);

    up.store(false, Ordering::SeqCst);
    assert_eq!(gateway.health_check(probe).await, [HealthStatus::Healthy]);
    assert_eq!(gateway.health_check(probe).await, [HealthStatus::Healthy]);
    assert_eq!(gateway.health_check(probe).await, [HealthStatus::Unhealthy]);
    let r = gateway
        .route_request(ApiRequest::new("cv/fbp", Method::POST, Some(ALICE_KEY), Params::imgraw("YWJj")))
        .await;
    assert_eq!((r.status, r.http_status), (-6, 503));

    up.store(true, Ordering::SeqCst);
    assert_eq!(gateway.health_check(probe).await, [HealthStatus::Unhealthy]);
    assert_eq!(gateway.health_check(probe).await, [HealthStatus::Healthy]);
}

#[tokio::test]
async fn server_shutdown_flushes_the_log() {
    let (store, dir) = common::seeded_store();
    let gateway = Gateway::with_local_workers(stock_registry(), Arc::clone(&store), 2, Limits::default());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let server = spawn_server(listener, gateway, RouterOptions::default(), Some(Duration::from_millis(20)))
        .await
        .unwrap();
    let client = reqwest::Client::new();
    for _ in 0..10 {
        let url = format!("{}/api/dm/zhihuliveeval?id=1", server.base_url());
        call(&client, &url, Method::GET, Some(ALICE_KEY), None).await;
    }
    server.shutdown().await.unwrap();
    assert_eq!(store.count_calls().unwrap(), 10);
    drop(dir);
}

#[test]
fn fuzzed_requests_always_get_well_formed_envelopes() {
    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};

    let rt = tokio::runtime::Runtime::new().unwrap();
    let (store, _dir) = common::seeded_store();
    let gateway = rt.block_on(async { Gateway::with_local_workers(stock_registry(), store, 2, Limits::default()) });
    let routes: Vec<String> = ROUTES
        .iter()
        .map(|(r, _, _)| r.to_string())
        .chain(["".into(), "cv".into(), "cv/fbp/".into(), "../etc".into()])
        .collect();
    let text = || prop_oneof![Just(None), ".{0,40}".prop_map(Some), Just(Some(encode_imgraw(b"img")))];
    let strategy = (
        proptest::sample::select(routes),
        any::<bool>(),
        prop_oneof![Just(None), Just(Some(ALICE_KEY.to_string())), ".{0,20}".prop_map(Some)],
        text(),
        text(),
        text(),
    );
    let mut runner = TestRunner::new(Config::with_cases(256));
    runner
        .run(&strategy, |(route, post, key, imgraw, imgurl, id)| {
            let method = if post { Method::POST } else { Method::GET };
            let request = ApiRequest::new(route, method, key.as_deref(), Params { imgraw, imgurl, id });
            let resp = rt.block_on(gateway.route_request(request));
            prop_assert!(resp.is_well_formed(), "{:?}", resp);
            let body = serde_json::to_value(&resp).unwrap();
            prop_assert!(body.get("status").is_some() && body.get("elapse").is_some());
            Ok(())
        })
        .unwrap();
}
