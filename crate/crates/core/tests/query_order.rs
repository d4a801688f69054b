mod oracles;

use std::collections::BTreeMap;

use fedkg_core::query::{parse_query, plan_order, QueryError, QueryGraph, QueryViolation};
use oracles::*;
use serde_json::json;

fn steps(qg: &QueryGraph) -> Vec<(String, String, bool)> {
    plan_order(qg).steps.into_iter().map(|s| (s.qedge_id, s.start, s.constraint)).collect()
}

#[test]
fn triangle_order_is_valid_for_every_edge_labelling() {
    let pairs = [("a", "b"), ("b", "c"), ("c", "a")];
    let labels = ["e0", "e1", "e2"];
    // all 6 assignments of labels to edges, with each node pinned in turn
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for perm in perms {
        for pinned in ["a", "b", "c"] {
            let nodes = ["a", "b", "c"]
                .iter()
                .map(|n| (n.to_string(), qnode((*n == pinned).then(|| vec!["X:1"]), None)))
                .collect();
            let edges = perm
                .iter()
                .zip(pairs)
                .map(|(&l, (s, o))| (labels[l].to_string(), qedge(s, o, None)))
                .collect();
            let qg = QueryGraph { nodes, edges };
            let order = steps(&qg);
            assert!(order_is_valid(&qg, &order), "{order:?}");
            assert_eq!(order.iter().filter(|s| s.2).count(), 1, "one edge closes the cycle");
        }
    }
}

#[test]
fn two_pinned_ends_make_middle_edge_a_constraint() {
    let qg = QueryGraph {
        nodes: BTreeMap::from([("a".into(), qnode(Some(vec!["X:1"]), None)), ("b".into(), qnode(Some(vec!["X:2"]), None))]),
        edges: BTreeMap::from([("e".into(), qedge("a", "b", None))]),
    };
    assert_eq!(steps(&qg), [("e".to_string(), "a".to_string(), true)]);
}

#[test]
fn rejects_invalid_graphs() {
    let bad = |qg: serde_json::Value| match parse_query(&json!({"message": {"query_graph": qg}})) {
        Err(QueryError::Invalid(v)) => v,
        other => panic!("{other:?}"),
    };
    assert!(bad(json!({"nodes": {}, "edges": {}})).contains(&QueryViolation::NoNodes));
    assert!(bad(json!({"nodes": {"a": {}}, "edges": {}})).contains(&QueryViolation::NoPinnedNode));
    let v = bad(json!({
        "nodes": {"a": {"ids": ["X:1"]}, "b": {}, "c": {}},
        "edges": {"e": {"subject": "a", "object": "b"}}
    }));
    assert!(v.iter().any(|x| matches!(x, QueryViolation::Disconnected)), "{v:?}");
    assert!(matches!(parse_query(&json!({})), Err(QueryError::Syntax { .. })));
}
