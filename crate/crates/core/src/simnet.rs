//! Deterministic in-process stand-in for the network. A scenario file lists
//! per-API routes with canned responses, latency and failure plans; every call
//! is logged so tests can check concurrency and retry behaviour.
//!
//! Latency is a tokio sleep, so under a paused runtime clock whole scenarios
//! run instantly and reproducibly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use percent_encoding::percent_decode_str;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::executor::{HttpRequestSpec, HttpResponse, Transport, TransportError};
use crate::registry::Method;

const CAPTURE: &str = "{value}";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Latency {
    Fixed(u64),
    Uniform([u64; 2]),
}

impl Default for Latency {
    fn default() -> Self {
        Latency::Fixed(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallSelector {
    All,
    First(u64),
    Indices(BTreeSet<u64>),
}

impl CallSelector {
    fn matches(&self, index: u64) -> bool {
        match self {
            CallSelector::All => true,
            CallSelector::First(n) => index < *n,
            CallSelector::Indices(set) => set.contains(&index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailEffect {
    Status(u16),
    /// Never answer; the caller's own timeout decides.
    Hang,
    ConnectError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailRule {
    pub calls: CallSelector,
    pub effect: FailEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Full URL including the query string, with exactly one `{value}`.
    pub url: String,
    /// For POST routes: the body field holding the input values. When set the
    /// URL must not contain `{value}`.
    #[serde(default)]
    pub body_field: Option<String>,
    #[serde(default)]
    pub batch_separator: Option<String>,
    #[serde(default = "default_status")]
    pub default_status: u16,
    #[serde(default = "default_body")]
    pub default_body: Value,
    #[serde(default)]
    pub responses: BTreeMap<String, Value>,
}

fn default_method() -> Method {
    Method::Get
}

fn default_status() -> u16 {
    404
}

fn default_body() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiScenario {
    pub api_id: String,
    #[serde(default)]
    pub latency_ms: Latency,
    #[serde(default)]
    pub fail_plan: Vec<FailRule>,
    #[serde(default)]
    pub routes: Vec<Route>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub apis: Vec<ApiScenario>,
}

impl Scenario {
    pub fn from_yaml(text: &str) -> Result<Self, ScenarioError> {
        // via a JSON value so enums can be written as plain maps
        let value: Value = serde_yaml::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let s: Scenario = serde_json::from_value(value).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_yaml(&text)
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let mut apis = BTreeSet::new();
        let mut patterns = BTreeSet::new();
        for api in &self.apis {
            if !apis.insert(&api.api_id) {
                return Err(ScenarioError::Invalid(format!("duplicate api {}", api.api_id)));
            }
            if let Latency::Uniform([lo, hi]) = api.latency_ms {
                if lo > hi {
                    return Err(ScenarioError::Invalid(format!("{}: latency range {lo}..{hi}", api.api_id)));
                }
            }
            for route in &api.routes {
                let captures = route.url.matches(CAPTURE).count();
                let expected = if route.body_field.is_some() { 0 } else { 1 };
                if captures != expected {
                    return Err(ScenarioError::Invalid(format!(
                        "{}: route {} must contain {expected} {CAPTURE}",
                        api.api_id, route.url
                    )));
                }
                if !patterns.insert((route.method, route.url.clone())) {
                    return Err(ScenarioError::Invalid(format!(
                        "duplicate route {} {}",
                        route.method, route.url
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CallEvent {
    Begin {
        seq: u64,
        call: u64,
        api_id: String,
        index: u64,
        url: String,
    },
    End {
        seq: u64,
        call: u64,
        status: Option<u16>,
    },
    Cancelled {
        seq: u64,
        call: u64,
    },
}

#[derive(Debug, Default)]
struct CallLog {
    clock: AtomicU64,
    events: Mutex<Vec<CallEvent>>,
}

impl CallLog {
    fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::SeqCst)
    }

    fn push(&self, make: impl FnOnce(u64) -> CallEvent) {
        let mut events = self.events.lock().unwrap();
        let seq = self.tick();
        events.push(make(seq));
    }
}

/// Logs `Cancelled` if the call future is dropped before it finishes.
struct InFlight<'a> {
    log: &'a CallLog,
    call: u64,
    done: bool,
}

impl InFlight<'_> {
    fn finish(mut self, status: Option<u16>) {
        self.done = true;
        let call = self.call;
        self.log.push(|seq| CallEvent::End { seq, call, status });
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        if !self.done {
            let call = self.call;
            self.log.push(|seq| CallEvent::Cancelled { seq, call });
        }
    }
}

struct ApiState {
    scenario: ApiScenario,
    rng: Mutex<ChaCha8Rng>,
    calls: AtomicU64,
}

pub struct SimNet {
    apis: Vec<ApiState>,
    log: Arc<CallLog>,
    next_call: AtomicU64,
}

fn match_pattern<'u>(pattern: &str, url: &'u str) -> Option<&'u str> {
    match pattern.split_once(CAPTURE) {
        Some((prefix, suffix)) => {
            let rest = url.strip_prefix(prefix)?;
            let captured = rest.strip_suffix(suffix)?;
            (!captured.is_empty()).then_some(captured)
        }
        None => (pattern == url).then_some(""),
    }
}

impl SimNet {
    pub fn new(scenario: Scenario) -> Self {
        let apis = scenario
            .apis
            .into_iter()
            .enumerate()
            .map(|(i, api)| ApiState {
                scenario: api,
                rng: Mutex::new(ChaCha8Rng::seed_from_u64(scenario.seed.wrapping_add(i as u64))),
                calls: AtomicU64::new(0),
            })
            .collect();
        Self {
            apis,
            log: Arc::default(),
            next_call: AtomicU64::new(0),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Scenario::load(path).map(Self::new)
    }

    pub fn from_yaml(text: &str) -> Result<Self, ScenarioError> {
        Scenario::from_yaml(text).map(Self::new)
    }

    pub fn events(&self) -> Vec<CallEvent> {
        self.log.events.lock().unwrap().clone()
    }

    /// Calls started for `api_id` so far.
    pub fn call_count(&self, api_id: &str) -> u64 {
        self.apis
            .iter()
            .find(|a| a.scenario.api_id == api_id)
            .map_or(0, |a| a.calls.load(Ordering::SeqCst))
    }

    pub fn total_calls(&self) -> u64 {
        self.next_call.load(Ordering::SeqCst)
    }

    /// URLs of every call that started, in start order.
    pub fn requested_urls(&self) -> Vec<String> {
        self.events()
            .into_iter()
            .filter_map(|e| match e {
                CallEvent::Begin { url, .. } => Some(url),
                _ => None,
            })
            .collect()
    }

    /// Largest number of calls in flight at once, from the event log.
    pub fn max_inflight(&self) -> usize {
        let mut current = 0usize;
        let mut max = 0usize;
        for e in self.events() {
            match e {
                CallEvent::Begin { .. } => {
                    current += 1;
                    max = max.max(current);
                }
                CallEvent::End { .. } | CallEvent::Cancelled { .. } => current -= 1,
            }
        }
        max
    }

    pub fn assert_max_inflight(&self, limit: usize) {
        let seen = self.max_inflight();
        assert!(seen <= limit, "{seen} calls were in flight at once; limit is {limit}");
    }

    fn route<'s>(&'s self, request: &HttpRequestSpec, url: &str) -> Option<(&'s ApiState, &'s Route, String)> {
        let mut best: Option<(&ApiState, &Route, String)> = None;
        for api in &self.apis {
            for route in &api.scenario.routes {
                if route.method != request.method {
                    continue;
                }
                let Some(captured) = match_pattern(&route.url, url) else {
                    continue;
                };
                let captured = match &route.body_field {
                    Some(field) => match request.body.as_ref().and_then(|b| b.get(field)) {
                        Some(Value::String(s)) => s.clone(),
                        Some(other) => other.to_string(),
                        None => continue,
                    },
                    None => percent_decode_str(captured).decode_utf8_lossy().into_owned(),
                };
                // prefer the route with the most literal text
                if best.as_ref().is_none_or(|(_, r, _)| r.url.len() < route.url.len()) {
                    best = Some((api, route, captured));
                }
            }
        }
        best
    }

    fn respond(route: &Route, captured: &str) -> HttpResponse {
        let values: Vec<&str> = match &route.batch_separator {
            Some(sep) => captured.split(sep.as_str()).collect(),
            None => vec![captured],
        };
        let hits: Vec<&Value> = values.iter().filter_map(|v| route.responses.get(*v)).collect();
        if hits.is_empty() {
            return HttpResponse::new(route.default_status, route.default_body.to_string());
        }
        if route.batch_separator.is_none() {
            return HttpResponse::new(200, hits[0].to_string());
        }
        let mut merged = Vec::new();
        for hit in hits {
            match hit {
                Value::Array(items) => merged.extend(items.iter().cloned()),
                other => merged.push(other.clone()),
            }
        }
        HttpResponse::new(200, Value::Array(merged).to_string())
    }
}

#[async_trait]
impl Transport for SimNet {
    async fn send(&self, request: &HttpRequestSpec) -> Result<HttpResponse, TransportError> {
        let url = request.full_url();
        let Some((api, route, captured)) = self.route(request, &url) else {
            return Ok(HttpResponse::new(404, r#"{"error":"no simulated route"}"#));
        };
        let index = api.calls.fetch_add(1, Ordering::SeqCst);
        let call = self.next_call.fetch_add(1, Ordering::SeqCst);
        let delay = match api.scenario.latency_ms {
            Latency::Fixed(ms) => ms,
            Latency::Uniform([lo, hi]) => api.rng.lock().unwrap().random_range(lo..=hi),
        };
        self.log.push(|seq| CallEvent::Begin {
            seq,
            call,
            api_id: api.scenario.api_id.clone(),
            index,
            url: url.clone(),
        });
        let guard = InFlight {
            log: &self.log,
            call,
            done: false,
        };
        tokio::time::sleep(Duration::from_millis(delay)).await;

        let effect = api
            .scenario
            .fail_plan
            .iter()
            .find(|rule| rule.calls.matches(index))
            .map(|rule| &rule.effect);
        let result = match effect {
            Some(FailEffect::Status(status)) => Ok(HttpResponse::new(*status, "{}")),
            Some(FailEffect::Hang) => std::future::pending().await,
            Some(FailEffect::ConnectError) => Err(TransportError::Connect("simulated connection failure".into())),
            None => Ok(Self::respond(route, &captured)),
        };
        guard.finish(result.as_ref().ok().map(|r| r.status));
        result
    }
}
