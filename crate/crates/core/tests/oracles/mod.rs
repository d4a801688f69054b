//! Independent reference implementations and instance generators shared by the
//! property tests and the acceptance suite. Nothing here calls the code under
//! test except to build inputs.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use fedkg_core::executor::RecordEdge;
use fedkg_core::query::{QEdge, QNode, QueryGraph};
use fedkg_core::registry::{Registry, SourceDocument, TypeVocabulary};
use fedkg_core::resolve::EntityRecord;
use fedkg_core::Curie;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::{json, Value};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures_dir().join(rel)
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// ---------------------------------------------------------------- planner

/// child -> parent, read straight from the YAML file.
pub fn parent_table(path: &Path) -> BTreeMap<String, String> {
    serde_yaml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn is_self_or_below(t: &str, ancestor: &str, parents: &BTreeMap<String, String>) -> bool {
    let mut cur = Some(t);
    let mut steps = 0;
    while let Some(c) = cur {
        if c == ancestor {
            return true;
        }
        steps += 1;
        assert!(steps < 1000, "cycle in hierarchy");
        cur = parents.get(c).map(String::as_str);
    }
    false
}

/// (api, op, input type, output type, input ns, output ns, forward?)
pub type PlanTuple = (String, String, String, String, String, String, bool);

/// Brute-force filter over every (input binding, output binding) pair of every
/// operation in the registry.
pub fn plan_edge_oracle(
    registry: &Registry,
    parents: &BTreeMap<String, String>,
    start_categories: Option<&[String]>,
    other_categories: Option<&[String]>,
    predicates: Option<&[String]>,
    forward: bool,
) -> BTreeSet<PlanTuple> {
    let mut known: BTreeSet<&str> = registry.vocabulary().semantic_types.iter().map(String::as_str).collect();
    for (c, p) in parents {
        known.insert(c);
        known.insert(p);
    }
    for doc in registry.documents() {
        for op in &doc.operations {
            for b in op.inputs.iter().chain(&op.outputs) {
                known.insert(&b.semantic_type);
            }
        }
    }
    let all_known = |cats: Option<&[String]>| cats.is_none_or(|c| c.iter().all(|t| known.contains(t.as_str())));
    if !all_known(start_categories) || !all_known(other_categories) {
        return BTreeSet::new();
    }
    let fits = |t: &str, cats: Option<&[String]>| cats.is_none_or(|c| c.iter().any(|a| is_self_or_below(t, a, parents)));

    let mut out = BTreeSet::new();
    for doc in registry.documents() {
        for op in &doc.operations {
            if !predicates.is_none_or(|p| p.contains(&op.predicate)) {
                continue;
            }
            for i in &op.inputs {
                for o in &op.outputs {
                    if fits(&i.semantic_type, start_categories) && fits(&o.semantic_type, other_categories) {
                        out.insert((
                            doc.api_id.clone(),
                            op.op_id.clone(),
                            i.semantic_type.clone(),
                            o.semantic_type.clone(),
                            i.id_namespace.clone(),
                            o.id_namespace.clone(),
                            forward,
                        ));
                    }
                }
            }
        }
    }
    out
}

pub const PREDICATES: &[&str] = &["affects", "related_to", "treats", "interacts_with"];

/// A random but valid registry over the fixture vocabulary.
pub fn random_registry<R: Rng>(rng: &mut R, vocab: &TypeVocabulary) -> Registry {
    let types: Vec<&String> = vocab.semantic_types.iter().collect();
    let namespaces: Vec<&String> = vocab.id_namespaces.iter().collect();
    let n_apis = rng.random_range(1..=4);
    let mut sources = Vec::new();
    for a in 0..n_apis {
        let mut paths = serde_json::Map::new();
        let mut ops = serde_json::Map::new();
        for o in 0..rng.random_range(1..=3) {
            let binding = |rng: &mut R| {
                let count = rng.random_range(1..=2);
                let mut chosen: Vec<&&String> = types.choose_multiple(rng, count).collect();
                chosen.sort();
                chosen
                    .into_iter()
                    .map(|t| json!({"id": namespaces.choose(rng).unwrap(), "semantic": t}))
                    .collect::<Vec<_>>()
            };
            let name = format!("op{o}");
            paths.insert(
                format!("/{name}"),
                json!({"get": {"x-bte-kgs-operations": [{"$ref": format!("#/components/x-bte-kgs-operations/{name}")}]}}),
            );
            ops.insert(
                name,
                json!([{
                    "inputs": binding(rng),
                    "outputs": binding(rng),
                    "parameters": {"q": "{ queryInputs }"},
                    "predicate": PREDICATES.choose(rng).unwrap(),
                    "source": format!("infores:api{a}"),
                    "response_mapping": {"$ref": "#/components/x-bte-response-mapping/m"},
                }]),
            );
        }
        sources.push(SourceDocument::new(json!({
            "info": {"title": format!("api {a}"), "x-api-id": format!("api{a}")},
            "servers": [{"url": format!("https://api{a}.example.org")}],
            "paths": paths,
            "components": {
                "x-bte-kgs-operations": ops,
                "x-bte-response-mapping": {"m": {"NCBIGene": "hits.id"}},
            },
        })));
    }
    Registry::parse(&sources, vocab.clone()).expect("generated registry is valid")
}

/// Random categories: absent, or 1-2 types, occasionally one unknown type.
pub fn random_categories<R: Rng>(rng: &mut R, vocab: &TypeVocabulary) -> Option<Vec<String>> {
    if rng.random_bool(0.2) {
        return None;
    }
    let types: Vec<&String> = vocab.semantic_types.iter().collect();
    let count = rng.random_range(1..=2);
    let mut out: Vec<String> = types
        .choose_multiple(rng, count)
        .map(|t| t.to_string())
        .collect();
    if rng.random_bool(0.05) {
        out.push("NotAType".into());
    }
    Some(out)
}

pub fn random_predicates<R: Rng>(rng: &mut R) -> Option<Vec<String>> {
    if rng.random_bool(0.5) {
        return None;
    }
    let count = rng.random_range(1..=2);
    let mut out: Vec<String> = PREDICATES
        .choose_multiple(rng, count)
        .map(|p| p.to_string())
        .collect();
    if rng.random_bool(0.1) {
        out.push("unheard_of".into());
    }
    Some(out)
}

pub fn qnode(ids: Option<Vec<&str>>, categories: Option<Vec<String>>) -> QNode {
    QNode {
        ids: ids.map(|v| v.into_iter().map(|s| s.parse().unwrap()).collect()),
        categories,
        extra: BTreeMap::new(),
    }
}

pub fn qedge(subject: &str, object: &str, predicates: Option<Vec<String>>) -> QEdge {
    QEdge {
        subject: subject.into(),
        object: object.into(),
        predicates,
        extra: BTreeMap::new(),
    }
}

// ---------------------------------------------------------------- assembly

pub struct JoinInstance {
    pub qg: QueryGraph,
    pub records: BTreeMap<String, Vec<RecordEdge>>,
}

pub fn entity(id: &str) -> EntityRecord {
    EntityRecord::self_record(&id.parse().unwrap())
}

pub fn record(qedge_id: &str, s: &str, o: &str, api: &str) -> RecordEdge {
    RecordEdge {
        subject: entity(s),
        predicate: "related_to".into(),
        object: entity(o),
        api_id: api.into(),
        op_id: "op".into(),
        source: String::new(),
        attributes: BTreeMap::new(),
        qedge_id: qedge_id.into(),
    }
}

/// Connected query graph with 2-5 nodes and at most 4 edges, plus random
/// records over at most 20 entities.
pub fn random_join_instance<R: Rng>(rng: &mut R) -> JoinInstance {
    let k = rng.random_range(2..=5usize);
    let n_entities = rng.random_range(2..=20usize);
    let mut nodes = BTreeMap::new();
    for i in 0..k {
        let ids = (i == 0).then(|| vec!["E:0"]);
        nodes.insert(format!("n{i}"), qnode(ids, None));
    }
    let mut pairs: Vec<(usize, usize)> = (1..k).map(|i| (rng.random_range(0..i), i)).collect();
    while pairs.len() < 4 && rng.random_bool(0.4) {
        let a = rng.random_range(0..k);
        let b = rng.random_range(0..k);
        if a != b {
            pairs.push((a, b));
        }
    }
    pairs.shuffle(rng);
    let mut edges = BTreeMap::new();
    let mut records = BTreeMap::new();
    for (j, (a, b)) in pairs.into_iter().enumerate() {
        let (s, o) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let eid = format!("e{j}");
        edges.insert(eid.clone(), qedge(&format!("n{s}"), &format!("n{o}"), None));
        // a small pool per edge so joins actually connect
        let n_records = rng.random_range(0..=10);
        let recs: Vec<RecordEdge> = (0..n_records)
            .map(|_| {
                let x = format!("E:{}", rng.random_range(0..n_entities));
                let y = format!("E:{}", rng.random_range(0..n_entities));
                let api = ["a", "b"].choose(rng).unwrap();
                record(&eid, &x, &y, api)
            })
            .collect();
        records.insert(eid, recs);
    }
    JoinInstance {
        qg: QueryGraph { nodes, edges },
        records,
    }
}

/// node -> id, and per edge the sorted (api, subject, object) of supporting records.
pub type OracleResult = (BTreeMap<String, String>, BTreeMap<String, Vec<(String, String, String)>>);

/// Enumerate every tuple over the entity universe and keep those where each
/// query edge has a supporting record.
pub fn join_oracle(inst: &JoinInstance) -> Vec<OracleResult> {
    let mut universe: BTreeSet<String> = BTreeSet::new();
    let mut support: HashSet<(String, String, String)> = HashSet::new();
    for (eid, recs) in &inst.records {
        for r in recs {
            universe.insert(r.subject.canonical_id.to_string());
            universe.insert(r.object.canonical_id.to_string());
            support.insert((eid.clone(), r.subject.canonical_id.to_string(), r.object.canonical_id.to_string()));
        }
    }
    let universe: Vec<String> = universe.into_iter().collect();
    let node_ids: Vec<&String> = inst.qg.nodes.keys().collect();
    let k = node_ids.len();
    let m = universe.len();
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    let total = m.pow(k as u32);
    for mut code in 0..total {
        let mut tuple = Vec::with_capacity(k);
        for _ in 0..k {
            tuple.push(&universe[code % m]);
            code /= m;
        }
        let binding: BTreeMap<&str, &String> = node_ids.iter().map(|n| n.as_str()).zip(tuple).collect();
        let ok = inst.qg.edges.iter().all(|(eid, e)| {
            support.contains(&(eid.clone(), binding[e.subject.as_str()].clone(), binding[e.object.as_str()].clone()))
        });
        if !ok {
            continue;
        }
        let edges = inst
            .qg
            .edges
            .iter()
            .map(|(eid, e)| {
                let (s, o) = (binding[e.subject.as_str()], binding[e.object.as_str()]);
                let mut recs: Vec<(String, String, String)> = inst.records[eid]
                    .iter()
                    .filter(|r| r.subject.canonical_id.as_str() == s && r.object.canonical_id.as_str() == o)
                    .map(|r| (r.api_id.clone(), s.clone(), o.clone()))
                    .collect();
                recs.sort();
                (eid.clone(), recs)
            })
            .collect();
        out.push((binding.into_iter().map(|(n, id)| (n.to_string(), id.clone())).collect(), edges));
    }
    out.sort();
    out
}

pub fn summarize(results: &[fedkg_core::assemble::ResultGraph]) -> Vec<OracleResult> {
    results
        .iter()
        .map(|r| {
            let nodes = r
                .node_bindings
                .iter()
                .map(|(n, e)| (n.clone(), e.canonical_id.to_string()))
                .collect();
            let edges = r
                .edge_bindings
                .iter()
                .map(|(eid, recs)| {
                    let mut v: Vec<(String, String, String)> = recs
                        .iter()
                        .map(|r| (r.api_id.clone(), r.subject.canonical_id.to_string(), r.object.canonical_id.to_string()))
                        .collect();
                    v.sort();
                    (eid.clone(), v)
                })
                .collect();
            (nodes, edges)
        })
        .collect()
}

// ---------------------------------------------------------------- NGD

/// Direct evaluation as log-ratios; `None` is an infinite distance.
pub fn ngd_oracle(f_x: u64, f_y: u64, f_xy: u64, n: u64) -> Option<f64> {
    if f_xy == 0 {
        return None;
    }
    let (lo, hi) = (f_x.min(f_y) as f64, f_x.max(f_y) as f64);
    if lo as u64 == n {
        return (f_xy == n).then_some(0.0);
    }
    Some((hi / f_xy as f64).ln() / (n as f64 / lo).ln())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Counts satisfying 0 <= f_xy <= min(f_x, f_y), f_x, f_y <= N, N >= 1.
pub fn random_counts<R: Rng>(rng: &mut R) -> (u64, u64, u64, u64) {
    let n = rng.random_range(1..=1_000_000_000u64);
    let f_x = rng.random_range(0..=n);
    let f_y = rng.random_range(0..=n);
    let f_xy = rng.random_range(0..=f_x.min(f_y));
    (f_x, f_y, f_xy, n)
}

// ---------------------------------------------------------------- query order

/// Every step starts at a node that is pinned or reached by an earlier step,
/// every edge appears once, and constraint steps find both ends bound.
pub fn order_is_valid(qg: &QueryGraph, steps: &[(String, String, bool)]) -> bool {
    let mut bound: BTreeSet<&str> = qg.nodes.iter().filter(|(_, n)| n.is_pinned()).map(|(k, _)| k.as_str()).collect();
    let mut seen = BTreeSet::new();
    for (eid, start, constraint) in steps {
        let Some(e) = qg.edges.get(eid) else { return false };
        if !seen.insert(eid) || (e.subject != *start && e.object != *start) {
            return false;
        }
        let other = if e.subject == *start { &e.object } else { &e.subject };
        if !bound.contains(start.as_str()) {
            return false;
        }
        if *constraint != bound.contains(other.as_str()) {
            return false;
        }
        bound.insert(other);
    }
    seen.len() == qg.edges.len()
}

pub fn curie(s: &str) -> Curie {
    s.parse().unwrap()
}

// ---------------------------------------------------------------- registry mutations

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    DanglingMappingRef,
    UnknownType,
    BadTemplate,
}

pub const MUTATIONS: [Mutation; 3] = [Mutation::DanglingMappingRef, Mutation::UnknownType, Mutation::BadTemplate];

/// Corrupt one randomly chosen operation of an annotation document.
pub fn mutate<R: Rng>(doc: &Value, kind: Mutation, rng: &mut R) -> Value {
    let mut doc = doc.clone();
    let ops = doc["components"]["x-bte-kgs-operations"].as_object_mut().unwrap();
    let names: Vec<String> = ops.keys().cloned().collect();
    let name = names.choose(rng).unwrap();
    let op = &mut ops.get_mut(name).unwrap()[0];
    match kind {
        Mutation::DanglingMappingRef => {
            op["response_mapping"]["$ref"] = json!("#/components/x-bte-response-mapping/no_such_mapping");
        }
        Mutation::UnknownType => {
            let side = if rng.random_bool(0.5) { "inputs" } else { "outputs" };
            op[side][0]["semantic"] = json!("Spaceship");
        }
        Mutation::BadTemplate => {
            let templates = if op.get("parameters").is_some() { "parameters" } else { "requestBody" };
            let fields = op[templates].as_object_mut().unwrap();
            let keys: Vec<String> = fields.keys().cloned().collect();
            let key = keys.choose(rng).unwrap();
            fields.insert(key.clone(), json!("{ queryInputs | rmPrefix( "));
        }
    }
    doc
}

pub fn yaml_file(path: &Path) -> Value {
    serde_yaml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
