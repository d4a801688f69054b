//! HTTP front end: `POST /v1/query` and `GET /v1/meta_knowledge_graph`.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use fedkg_core::engine::{render_document, Engine, EngineError};
use fedkg_core::metakg::export_metakg;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{watch, Semaphore};

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
    slots: Arc<Semaphore>,
}

/// Routes over one shared engine. At most `max_inflight` queries execute at
/// once; the rest wait for a slot.
pub fn router(engine: Arc<Engine>, max_inflight: usize) -> Router {
    let state = AppState {
        engine,
        slots: Arc::new(Semaphore::new(max_inflight.max(1))),
    };
    Router::new()
        .route("/v1/query", post(query))
        .route("/v1/meta_knowledge_graph", get(meta_knowledge_graph))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "not_found", "no such endpoint".into(), None) })
        .with_state(state)
}

fn document(status: StatusCode, doc: &Value) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], render_document(doc)).into_response()
}

fn error(status: StatusCode, kind: &str, message: String, details: Option<Value>) -> Response {
    let mut body = json!({"error": {"kind": kind, "message": message}});
    if let Some(d) = details {
        body["error"]["details"] = d;
    }
    document(status, &body)
}

async fn query(State(state): State<AppState>, body: Bytes) -> Response {
    let doc: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, "invalid_query", format!("body is not JSON: {e}"), None),
    };
    let Ok(_slot) = state.slots.acquire().await else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "service is stopping".into(), None);
    };
    match state.engine.query_document_strict(&doc).await {
        Ok(results) => document(StatusCode::OK, &results),
        Err(EngineError::Query(e)) => error(StatusCode::BAD_REQUEST, "invalid_query", e.to_string(), None),
        Err(EngineError::Unsatisfiable(edges)) => error(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unsatisfiable",
            EngineError::Unsatisfiable(edges.clone()).to_string(),
            Some(json!({"edges": edges})),
        ),
        Err(e) => {
            let id = uuid::Uuid::new_v4().to_string();
            tracing::error!(error_id = %id, error = %e, "query failed");
            error(
                StatusCode::INTERNAL_SERVER_ERROR,
                "internal",
                "internal error".into(),
                Some(json!({"error_id": id})),
            )
        }
    }
}

async fn meta_knowledge_graph(State(state): State<AppState>) -> Response {
    document(StatusCode::OK, &export_metakg(state.engine.metakg()))
}

/// Serve until `shutdown` resolves, then stop accepting connections and give
/// in-flight requests up to `drain` to finish.
pub async fn serve_until(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()>,
    drain: Duration,
) -> std::io::Result<()> {
    let (stop_tx, mut stop_rx) = watch::channel(false);
    let server = axum::serve(listener, app).with_graceful_shutdown(async move {
        let _ = stop_rx.wait_for(|stop| *stop).await;
    });
    let mut task = tokio::spawn(async move { server.await });
    tokio::select! {
        done = &mut task => return done.map_err(std::io::Error::other)?,
        _ = shutdown => {}
    }
    tracing::info!("shutting down, draining in-flight queries");
    let _ = stop_tx.send(true);
    match tokio::time::timeout(drain, &mut task).await {
        Ok(done) => done.map_err(std::io::Error::other)?,
        Err(_) => {
            tracing::warn!("drain timeout elapsed, dropping remaining connections");
            task.abort();
            Ok(())
        }
    }
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
