//! Query graphs: parsing, validation and edge execution order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::curie::Curie;
use crate::registry::decode::strip_biolink;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QNode {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<Curie>>,
    /// `None` matches any semantic type.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    /// Unrecognized fields, preserved as given.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl QNode {
    pub fn is_pinned(&self) -> bool {
        self.ids.as_ref().is_some_and(|ids| !ids.is_empty())
    }

    pub fn category_set(&self) -> Option<BTreeSet<String>> {
        self.categories.as_ref().map(|c| c.iter().cloned().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QEdge {
    pub subject: String,
    pub object: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicates: Option<Vec<String>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl QEdge {
    pub fn predicate_set(&self) -> Option<BTreeSet<String>> {
        self.predicates.as_ref().map(|p| p.iter().cloned().collect())
    }

    /// The endpoint opposite `node`.
    pub fn other_end(&self, node: &str) -> &str {
        if self.subject == node {
            &self.object
        } else {
            &self.subject
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryGraph {
    pub nodes: BTreeMap<String, QNode>,
    pub edges: BTreeMap<String, QEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum QueryViolation {
    NoNodes,
    NoPinnedNode,
    DanglingEdge { edge: String, node: String },
    SelfLoop { edge: String },
    Disconnected,
}

impl fmt::Display for QueryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoNodes => write!(f, "query graph has no nodes"),
            Self::NoPinnedNode => write!(f, "no query node has ids"),
            Self::DanglingEdge { edge, node } => write!(f, "edge {edge} references unknown node {node}"),
            Self::SelfLoop { edge } => write!(f, "edge {edge} has the same subject and object"),
            Self::Disconnected => write!(f, "query graph is not connected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("query syntax error at {path}: {reason}")]
    Syntax { path: String, reason: String },
    #[error("invalid query graph: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<QueryViolation>),
}

fn syntax(path: impl Into<String>, reason: impl Into<String>) -> QueryError {
    QueryError::Syntax {
        path: path.into(),
        reason: reason.into(),
    }
}

fn string_list(v: &Value, path: &str) -> Result<Vec<String>, QueryError> {
    let items = v.as_array().ok_or_else(|| syntax(path, "expected a list of strings"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            item.as_str()
                .map(str::to_string)
                .ok_or_else(|| syntax(format!("{path}[{i}]"), "expected a string"))
        })
        .collect()
}

fn split_known(obj: &Map<String, Value>, known: &[&str]) -> BTreeMap<String, Value> {
    obj.iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Parse a `{"message": {"query_graph": {...}}}` document and check it.
pub fn parse_query(doc: &Value) -> Result<QueryGraph, QueryError> {
    let qg = doc
        .get("message")
        .ok_or_else(|| syntax("message", "missing"))?
        .get("query_graph")
        .ok_or_else(|| syntax("message.query_graph", "missing"))?;
    let qg = qg
        .as_object()
        .ok_or_else(|| syntax("message.query_graph", "expected an object"))?;

    let mut nodes = BTreeMap::new();
    let raw_nodes = qg
        .get("nodes")
        .ok_or_else(|| syntax("message.query_graph.nodes", "missing"))?
        .as_object()
        .ok_or_else(|| syntax("message.query_graph.nodes", "expected an object"))?;
    for (id, raw) in raw_nodes {
        let path = format!("message.query_graph.nodes.{id}");
        let obj = raw.as_object().ok_or_else(|| syntax(&path, "expected an object"))?;
        let ids = match obj.get("ids") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let list = string_list(v, &format!("{path}.ids"))?;
                let curies = list
                    .iter()
                    .enumerate()
                    .map(|(i, s)| Curie::parse(s).map_err(|e| syntax(format!("{path}.ids[{i}]"), e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(curies)
            }
        };
        let categories = match obj.get("categories") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                string_list(v, &format!("{path}.categories"))?
                    .iter()
                    .map(|c| strip_biolink(c).to_string())
                    .collect(),
            ),
        };
        nodes.insert(
            id.clone(),
            QNode {
                ids,
                categories,
                extra: split_known(obj, &["ids", "categories"]),
            },
        );
    }

    let mut edges = BTreeMap::new();
    if let Some(raw_edges) = qg.get("edges") {
        let raw_edges = raw_edges
            .as_object()
            .ok_or_else(|| syntax("message.query_graph.edges", "expected an object"))?;
        for (id, raw) in raw_edges {
            let path = format!("message.query_graph.edges.{id}");
            let obj = raw.as_object().ok_or_else(|| syntax(&path, "expected an object"))?;
            let end = |k: &str| {
                obj.get(k)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| syntax(format!("{path}.{k}"), "missing or not a string"))
            };
            let predicates = match obj.get("predicates") {
                None | Some(Value::Null) => None,
                Some(v) => Some(
                    string_list(v, &format!("{path}.predicates"))?
                        .iter()
                        .map(|p| strip_biolink(p).to_string())
                        .collect(),
                ),
            };
            edges.insert(
                id.clone(),
                QEdge {
                    subject: end("subject")?,
                    object: end("object")?,
                    predicates,
                    extra: split_known(obj, &["subject", "object", "predicates"]),
                },
            );
        }
    }

    let graph = QueryGraph { nodes, edges };
    let violations = graph.violations();
    if violations.is_empty() {
        Ok(graph)
    } else {
        Err(QueryError::Invalid(violations))
    }
}

impl QueryGraph {
    pub fn violations(&self) -> Vec<QueryViolation> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            out.push(QueryViolation::NoNodes);
            return out;
        }
        if !self.nodes.values().any(QNode::is_pinned) {
            out.push(QueryViolation::NoPinnedNode);
        }
        let mut dangling = false;
        for (id, e) in &self.edges {
            for end in [&e.subject, &e.object] {
                if !self.nodes.contains_key(end) {
                    dangling = true;
                    out.push(QueryViolation::DanglingEdge {
                        edge: id.clone(),
                        node: end.clone(),
                    });
                }
            }
            if e.subject == e.object {
                out.push(QueryViolation::SelfLoop { edge: id.clone() });
            }
        }
        if !dangling && !self.is_connected() {
            out.push(QueryViolation::Disconnected);
        }
        out
    }

    fn is_connected(&self) -> bool {
        let Some(start) = self.nodes.keys().next() else { return true };
        let mut seen: BTreeSet<&str> = BTreeSet::from([start.as_str()]);
        let mut stack = vec![start.as_str()];
        while let Some(n) = stack.pop() {
            for e in self.edges.values() {
                let next = if e.subject == n {
                    &e.object
                } else if e.object == n {
                    &e.subject
                } else {
                    continue;
                };
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    pub fn pinned_nodes(&self) -> impl Iterator<Item = (&String, &QNode)> {
        self.nodes.iter().filter(|(_, n)| n.is_pinned())
    }

    /// `{"message": {"query_graph": ...}}`
    pub fn to_document(&self) -> Value {
        serde_json::json!({ "message": { "query_graph": self } })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderedEdge {
    pub qedge_id: String,
    /// Endpoint already bound when this edge executes.
    pub start: String,
    /// Both endpoints were bound before this edge ran (cycle-closing edge).
    pub constraint: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ExecutionOrder {
    pub steps: Vec<OrderedEdge>,
}

/// Breadth-first edge order starting from every pinned node at once. Edges
/// incident to the same node run in `qedge_id` order.
pub fn plan_order(qg: &QueryGraph) -> ExecutionOrder {
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    for (id, _) in qg.pinned_nodes() {
        bound.insert(id);
        queue.push_back(id);
    }

    let mut done: BTreeSet<&str> = BTreeSet::new();
    let mut steps = Vec::new();
    while let Some(node) = queue.pop_front() {
        for (eid, e) in &qg.edges {
            if done.contains(eid.as_str()) || (e.subject != node && e.object != node) {
                continue;
            }
            done.insert(eid);
            let other = e.other_end(node);
            if bound.contains(other) {
                steps.push(OrderedEdge {
                    qedge_id: eid.clone(),
                    start: e.subject.clone(),
                    constraint: true,
                });
            } else {
                steps.push(OrderedEdge {
                    qedge_id: eid.clone(),
                    start: node.to_string(),
                    constraint: false,
                });
                bound.insert(other);
                queue.push_back(other);
            }
        }
    }
    assert_eq!(
        steps.len(),
        qg.edges.len(),
        "valid query graphs are connected and pinned, so every edge is reachable"
    );
    ExecutionOrder { steps }
}
