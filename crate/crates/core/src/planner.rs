//! Query-path planning: which annotated operations can serve each query edge.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::metakg::{MetaEdge, MetaKG, TypeHierarchy};
use crate::query::{plan_order, ExecutionOrder, QEdge, QueryGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The operation's input is the query edge's subject.
    Forward,
    /// The operation's input is the query edge's object.
    Reverse,
}

/// One operation to call for one query edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvocationSpec {
    pub meta_edge: MetaEdge,
    pub direction: Direction,
    pub input_namespace: String,
    pub qedge_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPlan {
    pub order: ExecutionOrder,
    pub per_edge: BTreeMap<String, Vec<InvocationSpec>>,
    /// Query edges no operation can serve.
    pub unsatisfiable: Vec<String>,
}

impl QueryPlan {
    pub fn is_satisfiable(&self) -> bool {
        self.unsatisfiable.is_empty()
    }

    pub fn specs(&self, qedge_id: &str) -> &[InvocationSpec] {
        self.per_edge.get(qedge_id).map(Vec::as_slice).unwrap_or_default()
    }
}

/// Operations whose input side matches `start` and whose output side matches
/// the opposite endpoint. Operations are never called "backwards": when
/// `start` is the edge's object, the operation's input type must still match
/// `start`. Unknown categories match nothing.
pub fn plan_edge(
    qedge_id: &str,
    qedge: &QEdge,
    start: &str,
    qg: &QueryGraph,
    metakg: &MetaKG,
    hierarchy: &TypeHierarchy,
) -> Vec<InvocationSpec> {
    debug_assert!(qedge.subject == start || qedge.object == start);
    let direction = if qedge.subject == start {
        Direction::Forward
    } else {
        Direction::Reverse
    };
    let other = qedge.other_end(start);
    let input_types = qg.nodes.get(start).and_then(|n| n.category_set());
    let output_types = qg.nodes.get(other).and_then(|n| n.category_set());
    let predicates = qedge.predicate_set();

    let Ok(hits) = metakg.lookup(
        input_types.as_ref(),
        predicates.as_ref(),
        output_types.as_ref(),
        hierarchy,
    ) else {
        return Vec::new();
    };
    hits.into_iter()
        .map(|e| InvocationSpec {
            meta_edge: e.clone(),
            direction,
            input_namespace: e.subject_namespace.clone(),
            qedge_id: qedge_id.to_string(),
        })
        .collect()
}

pub fn plan_query(qg: &QueryGraph, metakg: &MetaKG, hierarchy: &TypeHierarchy) -> QueryPlan {
    let order = plan_order(qg);
    let mut per_edge = BTreeMap::new();
    let mut unsatisfiable = Vec::new();
    for step in &order.steps {
        let qedge = &qg.edges[&step.qedge_id];
        let specs = plan_edge(&step.qedge_id, qedge, &step.start, qg, metakg, hierarchy);
        if specs.is_empty() {
            unsatisfiable.push(step.qedge_id.clone());
        }
        per_edge.insert(step.qedge_id.clone(), specs);
    }
    unsatisfiable.sort();
    QueryPlan {
        order,
        per_edge,
        unsatisfiable,
    }
}
