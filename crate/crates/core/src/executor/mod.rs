//! Query-path execution: render sub-queries from operation templates, send them
//! with bounded concurrency and retries, and map responses to record edges.

mod extract;
mod transport;

use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::Serialize;
use serde_json::{Map, Value};

pub use extract::{extract_raw, extract_records, finalize_records, RawRecord, RecordEdge};
pub use transport::{encode_url_value, HttpRequestSpec, HttpResponse, Transport, TransportError};
#[cfg(feature = "live")]
pub use transport::LiveTransport;

pub use crate::registry::{apply_filter_chain, FilterCall, FilterContext};
use crate::planner::InvocationSpec;
use crate::registry::{Operation, Registry, Template};
use crate::resolve::{aliases_in_namespace, EntityRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ExecutionPolicy {
    pub max_concurrency: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for ExecutionPolicy {
    fn default() -> Self {
        Self {
            max_concurrency: 8,
            timeout_ms: 10_000,
            max_retries: 2,
            retry_backoff_ms: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid execution policy: {0}")]
pub struct PolicyError(pub &'static str);

impl ExecutionPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.max_concurrency == 0 {
            return Err(PolicyError("max_concurrency must be positive"));
        }
        if self.timeout_ms == 0 {
            return Err(PolicyError("timeout_ms must be positive"));
        }
        if self.retry_backoff_ms == 0 {
            return Err(PolicyError("retry_backoff_ms must be positive"));
        }
        Ok(())
    }
}

/// One input value sent to an API, and the entity it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputBinding {
    pub value: String,
    pub record: EntityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubQuery {
    pub spec: InvocationSpec,
    pub inputs: Vec<InputBinding>,
    pub request: HttpRequestSpec,
}

impl SubQuery {
    pub fn input_values(&self) -> Vec<&str> {
        self.inputs.iter().map(|i| i.value.as_str()).collect()
    }
}

/// Something worth reporting that did not stop execution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub level: DiagnosticLevel,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DiagnosticLevel {
    Info,
    Warning,
    Error,
}

impl Diagnostic {
    pub fn new(level: DiagnosticLevel, code: &str, message: impl Into<String>) -> Self {
        Self {
            level,
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("operation {api_id}/{op_id} is not in the registry")]
    UnknownOperation { api_id: String, op_id: String },
    #[error("no input entity has an identifier in namespace {namespace} for {api_id}/{op_id}")]
    NoUsableInputs {
        api_id: String,
        op_id: String,
        namespace: String,
    },
}

fn render_url_template(t: &Template, values: &[String], op: &Operation, namespace: &str) -> String {
    let ctx = FilterContext { namespace };
    t.render_with(|p| {
        values
            .iter()
            .map(|v| encode_url_value(&apply_filter_chain(v, &p.filters, ctx)))
            .collect::<Vec<_>>()
            .join(&op.batch_separator)
    })
}

fn build_request(server_url: &str, op: &Operation, values: &[String], namespace: &str) -> HttpRequestSpec {
    let path = render_url_template(&op.path_template, values, op, namespace);
    let query = op
        .query_parameters()
        .map(|(name, t)| (name.clone(), render_url_template(t, values, op, namespace)))
        .collect();
    let body = op.request_body.as_ref().map(|fields| {
        let ctx = FilterContext { namespace };
        let obj: Map<String, Value> = fields
            .iter()
            .map(|(k, t)| (k.clone(), Value::String(t.render(values, &op.batch_separator, ctx))))
            .collect();
        Value::Object(obj)
    });
    let headers = if body.is_some() {
        vec![("content-type".to_string(), "application/json".to_string())]
    } else {
        Vec::new()
    };
    HttpRequestSpec {
        method: op.method,
        url: format!("{}{}", server_url.trim_end_matches('/'), path),
        query,
        headers,
        body,
    }
}

/// Render the sub-queries that send `inputs` to the spec's operation. Entities
/// with no identifier in the operation's input namespace are skipped and
/// reported. Batch operations get `ceil(n / batch_size)` requests; others get
/// one request per value.
pub fn build_subqueries(
    spec: &InvocationSpec,
    inputs: &[EntityRecord],
    registry: &Registry,
) -> Result<(Vec<SubQuery>, Vec<Diagnostic>), ExecError> {
    let edge = &spec.meta_edge;
    let (doc, op) = registry
        .operation(&edge.api_id, &edge.op_id)
        .ok_or_else(|| ExecError::UnknownOperation {
            api_id: edge.api_id.clone(),
            op_id: edge.op_id.clone(),
        })?;

    let mut diagnostics = Vec::new();
    let mut bindings = Vec::new();
    for record in inputs {
        let aliases = aliases_in_namespace(record, &spec.input_namespace);
        if aliases.is_empty() {
            diagnostics.push(Diagnostic::new(
                DiagnosticLevel::Info,
                "SkippedEntity",
                format!(
                    "{} has no {} identifier for {}/{}",
                    record.canonical_id, spec.input_namespace, edge.api_id, edge.op_id
                ),
            ));
        }
        bindings.extend(aliases.into_iter().map(|value| InputBinding {
            value,
            record: record.clone(),
        }));
    }
    if bindings.is_empty() {
        return Err(ExecError::NoUsableInputs {
            api_id: edge.api_id.clone(),
            op_id: edge.op_id.clone(),
            namespace: spec.input_namespace.clone(),
        });
    }

    let chunk = if op.support_batch {
        op.batch_size.unwrap_or(bindings.len()).max(1)
    } else {
        1
    };
    let subqueries = bindings
        .chunks(chunk)
        .map(|group| {
            let values: Vec<String> = group.iter().map(|b| b.value.clone()).collect();
            SubQuery {
                spec: spec.clone(),
                inputs: group.to_vec(),
                request: build_request(&doc.server_url, op, &values, &spec.input_namespace),
            }
        })
        .collect();
    Ok((subqueries, diagnostics))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureKind {
    Timeout,
    Status { status: u16 },
    Transport { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Response { response: HttpResponse, attempts: u32 },
    Failure(Failure),
}

impl Outcome {
    pub fn attempts(&self) -> u32 {
        match self {
            Outcome::Response { attempts, .. } => *attempts,
            Outcome::Failure(f) => f.attempts,
        }
    }

    pub fn response(&self) -> Option<&HttpResponse> {
        match self {
            Outcome::Response { response, .. } => Some(response),
            Outcome::Failure(_) => None,
        }
    }
}

async fn send_with_retries(request: &HttpRequestSpec, transport: &dyn Transport, policy: &ExecutionPolicy) -> Outcome {
    let deadline = Duration::from_millis(policy.timeout_ms);
    let backoff = Duration::from_millis(policy.retry_backoff_ms);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let kind = match tokio::time::timeout(deadline, transport.send(request)).await {
            Ok(Ok(response)) if response.status < 400 => {
                return Outcome::Response {
                    response,
                    attempts: attempt,
                }
            }
            Ok(Ok(response)) if response.status < 500 => {
                // client errors are not retried
                return Outcome::Failure(Failure {
                    kind: FailureKind::Status {
                        status: response.status,
                    },
                    attempts: attempt,
                });
            }
            Ok(Ok(response)) => FailureKind::Status {
                status: response.status,
            },
            Ok(Err(TransportError::Timeout)) | Err(_) => FailureKind::Timeout,
            Ok(Err(e)) => FailureKind::Transport { message: e.to_string() },
        };
        if attempt > policy.max_retries {
            return Outcome::Failure(Failure { kind, attempts: attempt });
        }
        tracing::debug!(%request, attempt, ?kind, "retrying");
        tokio::time::sleep(backoff).await;
    }
}

/// Send every sub-query, at most `policy.max_concurrency` at a time. Failures
/// are returned in-band; the output is in input order.
pub async fn execute(
    subqueries: Vec<SubQuery>,
    transport: &dyn Transport,
    policy: &ExecutionPolicy,
) -> Vec<(SubQuery, Outcome)> {
    let limit = policy.max_concurrency.max(1);
    stream::iter(subqueries)
        .map(|sq| async move {
            let outcome = send_with_retries(&sq.request, transport, policy).await;
            (sq, outcome)
        })
        .buffered(limit)
        .collect()
        .await
}
