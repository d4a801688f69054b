//! Join record edges into result sub-graphs that match the query topology.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::curie::Curie;
use crate::executor::RecordEdge;
use crate::query::QueryGraph;
use crate::resolve::EntityRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultGraph {
    pub node_bindings: BTreeMap<String, EntityRecord>,
    pub edge_bindings: BTreeMap<String, Vec<RecordEdge>>,
    pub score: f64,
}

impl ResultGraph {
    /// Canonical ids in qnode order; the sort key for results.
    pub fn binding_key(&self) -> Vec<&Curie> {
        self.node_bindings.values().map(|r| &r.canonical_id).collect()
    }
}

type Pairs<'r> = BTreeMap<(&'r Curie, &'r Curie), Vec<&'r RecordEdge>>;

/// Edges in an order where each edge after the first touches an already
/// bound node whenever possible, so the join prunes early.
fn join_order(qg: &QueryGraph) -> Vec<&str> {
    let mut remaining: Vec<&str> = qg.edges.keys().map(String::as_str).collect();
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let pick = remaining
            .iter()
            .position(|e| {
                let q = &qg.edges[*e];
                bound.contains(q.subject.as_str()) || bound.contains(q.object.as_str())
            })
            .unwrap_or(0);
        let e = remaining.remove(pick);
        bound.insert(&qg.edges[e].subject);
        bound.insert(&qg.edges[e].object);
        order.push(e);
    }
    order
}

struct Join<'a> {
    qg: &'a QueryGraph,
    order: Vec<&'a str>,
    pairs: BTreeMap<&'a str, Pairs<'a>>,
    entities: BTreeMap<&'a Curie, &'a EntityRecord>,
}

impl<'a> Join<'a> {
    fn run(&self, depth: usize, binding: &mut BTreeMap<&'a str, &'a Curie>, out: &mut Vec<BTreeMap<&'a str, &'a Curie>>) {
        let Some(eid) = self.order.get(depth) else {
            out.push(binding.clone());
            return;
        };
        let q = &self.qg.edges[*eid];
        let (s, o) = (q.subject.as_str(), q.object.as_str());
        let (bs, bo) = (binding.get(s).copied(), binding.get(o).copied());
        for (subject, object) in self.pairs[eid].keys() {
            if bs.is_some_and(|b| b != *subject) || bo.is_some_and(|b| b != *object) {
                continue;
            }
            binding.insert(s, subject);
            binding.insert(o, object);
            self.run(depth + 1, binding, out);
            if bs.is_none() {
                binding.remove(s);
            }
            if bo.is_none() {
                binding.remove(o);
            }
        }
    }
}

/// Every assignment of one entity per query node such that each query edge has
/// at least one record between the assigned endpoints. Parallel records are
/// merged into the edge's binding list.
///
/// `seeds` supplies entities for query nodes with no incident edge (a
/// single-node query); other nodes take their entities from the records.
pub fn assemble(
    records: &BTreeMap<String, Vec<RecordEdge>>,
    qg: &QueryGraph,
    seeds: &BTreeMap<String, Vec<EntityRecord>>,
) -> Vec<ResultGraph> {
    let mut pairs: BTreeMap<&str, Pairs> = BTreeMap::new();
    let mut entities: BTreeMap<&Curie, &EntityRecord> = BTreeMap::new();
    for eid in qg.edges.keys() {
        let mut by_pair: Pairs = BTreeMap::new();
        for r in records.get(eid).into_iter().flatten() {
            by_pair.entry(r.endpoints()).or_default().push(r);
            entities.entry(&r.subject.canonical_id).or_insert(&r.subject);
            entities.entry(&r.object.canonical_id).or_insert(&r.object);
        }
        if by_pair.is_empty() {
            return Vec::new();
        }
        pairs.insert(eid, by_pair);
    }

    let join = Join {
        qg,
        order: join_order(qg),
        pairs,
        entities,
    };
    let mut found = Vec::new();
    join.run(0, &mut BTreeMap::new(), &mut found);

    // nodes no edge touches are bound from the seeds
    let isolated: Vec<&String> = qg
        .nodes
        .keys()
        .filter(|n| !qg.edges.values().any(|e| &e.subject == *n || &e.object == *n))
        .collect();

    let mut results: Vec<ResultGraph> = Vec::new();
    for binding in found {
        let node_bindings: BTreeMap<String, EntityRecord> = binding
            .iter()
            .map(|(n, id)| (n.to_string(), join.entities[id].clone()))
            .collect();
        let edge_bindings = qg
            .edges
            .iter()
            .map(|(eid, q)| {
                let key = (binding[q.subject.as_str()], binding[q.object.as_str()]);
                let merged = join.pairs[eid.as_str()][&key].iter().map(|r| (*r).clone()).collect();
                (eid.clone(), merged)
            })
            .collect();
        results.push(ResultGraph {
            node_bindings,
            edge_bindings,
            score: 0.0,
        });
    }
    for node in isolated {
        let choices = seeds.get(node).map(Vec::as_slice).unwrap_or_default();
        let mut expanded = Vec::new();
        for base in &results {
            for entity in choices {
                let mut r = base.clone();
                r.node_bindings.insert(node.clone(), entity.clone());
                expanded.push(r);
            }
        }
        results = expanded;
    }
    results.sort_by(|a, b| a.binding_key().cmp(&b.binding_key()));
    results.dedup_by(|a, b| a.binding_key() == b.binding_key());
    results
}
