use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use fedkg_cli::server::{router, serve_until};
use fedkg_core::config::{CountsConfig, EngineConfig, ResolverConfig, TransportConfig};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn config(registry: &str, scenario: &str) -> EngineConfig {
    let mut cfg = EngineConfig::new(fixture(registry), TransportConfig::Simnet(fixture(scenario)));
    cfg.resolver = ResolverConfig::Fixture(fixture("ids.tsv"));
    cfg.counts = CountsConfig::Fixture(fixture("counts.tsv"));
    cfg
}

fn app(cfg: EngineConfig) -> Router {
    router(Arc::new(cfg.build().unwrap()), 4)
}

async fn call(app: &Router, method: &str, path: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    assert_eq!(resp.headers()["content-type"], "application/json");
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn ngly1_query() -> String {
    std::fs::read_to_string(fixture("ngly1_query.json")).unwrap()
}

#[tokio::test]
async fn ngly1_query_over_http() {
    let app = app(config("registry", "fig1_ngly1.yaml"));
    let (status, body) = call(&app, "POST", "/v1/query", &ngly1_query()).await;
    assert_eq!(status, StatusCode::OK);
    let doc: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(doc["message"]["results"].as_array().unwrap().len(), 3);
    // stateless: the same query renders the same bytes
    let (_, again) = call(&app, "POST", "/v1/query", &ngly1_query()).await;
    assert_eq!(body, again);
}

#[tokio::test]
async fn concurrent_requests_are_isolated() {
    let app = app(config("registry", "fig1_ngly1.yaml"));
    let (_, expected) = call(&app, "POST", "/v1/query", &ngly1_query()).await;
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { call(&app, "POST", "/v1/query", &ngly1_query()).await })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap(), (StatusCode::OK, expected.clone()));
    }
}

#[tokio::test]
async fn meta_knowledge_graph_of_litvar() {
    let app = app(config("litvar", "litvar_scenario.yaml"));
    let (status, body) = call(&app, "GET", "/v1/meta_knowledge_graph", "").await;
    assert_eq!(status, StatusCode::OK);
    let doc: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(doc["nodes"].as_object().unwrap().len(), 2);
    assert_eq!(doc["edges"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn error_statuses() {
    let app = app(config("registry", "fig1_ngly1.yaml"));
    for bad in ["{}", "not json", r#"{"message": {"query_graph": {"nodes": {}, "edges": {}}}}"#] {
        let (status, body) = call(&app, "POST", "/v1/query", bad).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        let doc: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(doc["error"]["kind"], "invalid_query");
    }
    let gene_to_gene = r#"{"message": {"query_graph": {
        "nodes": {"a": {"ids": ["NCBIGene:55768"], "categories": ["biolink:Gene"]}, "b": {"categories": ["biolink:Gene"]}},
        "edges": {"e0": {"subject": "a", "object": "b"}}}}}"#;
    let (status, _) = call(&app, "POST", "/v1/query", gene_to_gene).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "GET", "/v2/query", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn internal_errors_are_opaque() {
    // the resolver endpoint is not in the scenario, so every lookup fails
    let mut cfg = config("registry", "fig1_ngly1.yaml");
    cfg.resolver = ResolverConfig::Http("https://resolver.invalid/get_normalized_nodes".into());
    let app = app(cfg);
    let (status, body) = call(&app, "POST", "/v1/query", &ngly1_query()).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    let doc: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(doc["error"]["message"], "internal error");
    assert_eq!(doc["error"]["details"]["error_id"].as_str().unwrap().len(), 36);
    assert!(!body.contains("resolver.invalid"));
}

async fn raw_post(addr: std::net::SocketAddr, path: &str, body: &str) -> String {
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let req = format!(
        "POST {path} HTTP/1.1\r\nhost: {addr}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test]
async fn shutdown_drains_in_flight_queries() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_until(
        listener,
        app(config("registry", "fig1_ngly1.yaml")),
        async {
            let _ = stop_rx.await;
        },
        Duration::from_secs(5),
    ));
    let client = tokio::spawn(async move { raw_post(addr, "/v1/query", &ngly1_query()).await });
    // simulated API latency keeps the query running past the signal
    tokio::time::sleep(Duration::from_millis(15)).await;
    stop_tx.send(()).unwrap();
    let response = client.await.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    server.await.unwrap().unwrap();
    assert!(tokio::net::TcpStream::connect(addr).await.is_err());
}
