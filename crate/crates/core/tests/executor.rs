mod oracles;

use std::sync::Arc;
use std::time::Duration;

use fedkg_core::executor::{build_subqueries, execute, ExecutionPolicy, FailureKind, Outcome};
use fedkg_core::metakg::{build_metakg, TypeHierarchy};
use fedkg_core::planner::{plan_edge, InvocationSpec};
use fedkg_core::query::parse_query;
use fedkg_core::registry::Registry;
use fedkg_core::resolve::EntityRecord;
use fedkg_core::simnet::SimNet;
use oracles::*;
use serde_json::json;

fn litvar_spec() -> (Registry, InvocationSpec) {
    let registry = Registry::load_dir(&fixture("litvar")).unwrap();
    let metakg = build_metakg(&registry, &TypeHierarchy::empty());
    let qg = parse_query(&read_json(&fixture("litvar_query.json"))).unwrap();
    let spec = plan_edge("e0", &qg.edges["e0"], "n0", &qg, &metakg, &TypeHierarchy::empty()).remove(0);
    (registry, spec)
}

fn variants(n: usize) -> Vec<EntityRecord> {
    (0..n).map(|i| entity(&format!("DBSNP:rs{i}"))).collect()
}

fn scenario(fail_plan: &str, latency: &str) -> Arc<SimNet> {
    let text = format!(
        r#"
apis:
  - api_id: litvar
    latency_ms: {latency}
    fail_plan: {fail_plan}
    routes:
      - url: "https://www.ncbi.nlm.nih.gov/research/bionlp/litvar/api/v1/entity/litvar/{{value}}%23%23?format=json"
        default_status: 200
        default_body: {{gene: {{id: 1}}}}
"#
    );
    Arc::new(SimNet::from_yaml(&text).unwrap())
}

fn policy(max_concurrency: usize, max_retries: u32) -> ExecutionPolicy {
    ExecutionPolicy {
        max_concurrency,
        timeout_ms: 1000,
        max_retries,
        retry_backoff_ms: 100,
    }
}

#[test]
fn litvar_url_is_byte_exact() {
    let (registry, spec) = litvar_spec();
    let (sqs, diags) = build_subqueries(&spec, &[entity("DBSNP:rs121913527")], &registry).unwrap();
    assert!(diags.is_empty());
    assert_eq!(sqs.len(), 1);
    assert_eq!(
        sqs[0].request.full_url(),
        "https://www.ncbi.nlm.nih.gov/research/bionlp/litvar/api/v1/entity/litvar/rs121913527%23%23?format=json"
    );
}

#[test]
fn entities_without_the_input_namespace_are_skipped() {
    let (registry, spec) = litvar_spec();
    let inputs = vec![entity("DBSNP:rs1"), entity("NCBIGene:1")];
    let (sqs, diags) = build_subqueries(&spec, &inputs, &registry).unwrap();
    assert_eq!(sqs.len(), 1);
    assert_eq!(diags.len(), 1);
    assert!(build_subqueries(&spec, &[entity("NCBIGene:1")], &registry).is_err());
}

#[test]
fn batch_operations_are_chunked() {
    let registry = Registry::load_dir(&fixture("registry")).unwrap();
    let h = TypeHierarchy::load(&fixture("registry/hierarchy.yaml")).unwrap();
    let metakg = build_metakg(&registry, &h);
    let qg = parse_query(&read_json(&fixture("ngly1_query.json"))).unwrap();
    let spec = plan_edge("e1", &qg.edges["e1"], "n1", &qg, &metakg, &h).remove(0);
    let genes: Vec<EntityRecord> = (0..2500).map(|i| entity(&format!("NCBIGene:{i}"))).collect();
    let (sqs, _) = build_subqueries(&spec, &genes, &registry).unwrap();
    assert_eq!(sqs.iter().map(|s| s.inputs.len()).collect::<Vec<_>>(), [1000, 1000, 500]);
    let body = sqs[2].request.body.as_ref().unwrap();
    assert_eq!(body["scopes"], json!("drugcentral.targets.gene_id"));
    assert!(body["q"].as_str().unwrap().starts_with("2000,2001,"));
}

#[tokio::test(start_paused = true)]
async fn server_errors_are_retried_until_success() {
    let (registry, spec) = litvar_spec();
    let net = scenario("[{calls: {first: 2}, effect: {status: 500}}]", "10");
    let (sqs, _) = build_subqueries(&spec, &variants(1), &registry).unwrap();
    let out = execute(sqs, net.as_ref(), &policy(4, 2)).await;
    assert!(matches!(&out[0].1, Outcome::Response { attempts: 3, response } if response.status == 200));
    assert_eq!(net.call_count("litvar"), 3);
}

#[tokio::test(start_paused = true)]
async fn retries_are_bounded() {
    let (registry, spec) = litvar_spec();
    let net = scenario("[{calls: all, effect: {status: 503}}]", "10");
    let (sqs, _) = build_subqueries(&spec, &variants(1), &registry).unwrap();
    let out = execute(sqs, net.as_ref(), &policy(4, 2)).await;
    let Outcome::Failure(f) = &out[0].1 else { panic!() };
    assert_eq!((f.attempts, &f.kind), (3, &FailureKind::Status { status: 503 }));
}

#[tokio::test(start_paused = true)]
async fn client_errors_are_not_retried() {
    let (registry, spec) = litvar_spec();
    let net = scenario("[{calls: all, effect: {status: 404}}]", "10");
    let (sqs, _) = build_subqueries(&spec, &variants(1), &registry).unwrap();
    let out = execute(sqs, net.as_ref(), &policy(4, 2)).await;
    assert_eq!(out[0].1.attempts(), 1);
    assert_eq!(net.call_count("litvar"), 1);
}

#[tokio::test(start_paused = true)]
async fn hung_calls_time_out_per_attempt() {
    let (registry, spec) = litvar_spec();
    let net = scenario("[{calls: all, effect: hang}]", "0");
    let (sqs, _) = build_subqueries(&spec, &variants(1), &registry).unwrap();
    let start = tokio::time::Instant::now();
    let out = execute(sqs, net.as_ref(), &policy(4, 1)).await;
    let Outcome::Failure(f) = &out[0].1 else { panic!() };
    assert_eq!((f.attempts, &f.kind), (2, &FailureKind::Timeout));
    // two timeouts and one backoff
    assert_eq!(start.elapsed(), Duration::from_millis(2100));
    net.assert_max_inflight(1);
}

#[tokio::test(start_paused = true)]
async fn concurrency_is_bounded_and_order_kept() {
    let (registry, spec) = litvar_spec();
    for limit in [1, 2, 4, 8] {
        let net = scenario("[]", "[5, 50]");
        let (sqs, _) = build_subqueries(&spec, &variants(24), &registry).unwrap();
        let urls: Vec<String> = sqs.iter().map(|s| s.request.full_url()).collect();
        let out = execute(sqs, net.as_ref(), &policy(limit, 0)).await;
        assert_eq!(out.iter().map(|(s, _)| s.request.full_url()).collect::<Vec<_>>(), urls);
        assert_eq!(net.max_inflight(), limit);
    }
}

#[tokio::test(start_paused = true)]
async fn connection_failures_are_in_band() {
    let (registry, spec) = litvar_spec();
    let net = scenario("[{calls: all, effect: connect_error}]", "10");
    let (sqs, _) = build_subqueries(&spec, &variants(2), &registry).unwrap();
    let out = execute(sqs, net.as_ref(), &policy(2, 1)).await;
    assert!(out.iter().all(|(_, o)| matches!(o, Outcome::Failure(f) if matches!(f.kind, FailureKind::Transport { .. }) && f.attempts == 2)));
}

#[tokio::test(start_paused = true)]
async fn unmatched_routes_answer_404() {
    let (registry, spec) = litvar_spec();
    let net = Arc::new(SimNet::from_yaml("apis: []").unwrap());
    let (sqs, _) = build_subqueries(&spec, &variants(1), &registry).unwrap();
    let out = execute(sqs, net.as_ref(), &policy(2, 2)).await;
    let Outcome::Failure(f) = &out[0].1 else { panic!() };
    assert_eq!((f.attempts, &f.kind), (1, &FailureKind::Status { status: 404 }));
}
