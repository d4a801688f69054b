//! End-to-end query execution: plan, walk the query edges calling APIs,
//! resolve identifiers, then assemble, score and rank result sub-graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::assemble::{assemble, ResultGraph};
use crate::curie::Curie;
use crate::executor::{
    build_subqueries, execute, extract_raw, finalize_records, Diagnostic, DiagnosticLevel, ExecutionPolicy, Outcome,
    RawRecord, RecordEdge, SubQuery, Transport,
};
use crate::metakg::{build_metakg, MetaKG, TypeHierarchy};
use crate::planner::{plan_query, InvocationSpec, QueryPlan};
use crate::query::{parse_query, QueryError, QueryGraph};
use crate::registry::Registry;
use crate::resolve::{resolve, EntityRecord, ResolverError, ResolverProvider};
use crate::score::{rank, score_all, CountsProvider};

const BIOLINK: &str = "biolink:";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("no operation can serve query edge(s): {}", .0.join(", "))]
    Unsatisfiable(Vec<String>),
    #[error(transparent)]
    Resolver(#[from] ResolverError),
}

/// Everything one query run produced.
#[derive(Debug, Clone, Serialize)]
pub struct QueryRun {
    pub query_graph: QueryGraph,
    pub plan: QueryPlan,
    pub records: BTreeMap<String, Vec<RecordEdge>>,
    pub results: Vec<ResultGraph>,
    pub logs: Vec<Diagnostic>,
}

/// Shared, immutable after construction; safe to use from many tasks.
pub struct Engine {
    registry: Arc<Registry>,
    hierarchy: TypeHierarchy,
    metakg: MetaKG,
    resolver: Arc<dyn ResolverProvider>,
    counts: Arc<dyn CountsProvider>,
    transport: Arc<dyn Transport>,
    policy: ExecutionPolicy,
}

fn dedupe_entities(records: impl IntoIterator<Item = EntityRecord>) -> Vec<EntityRecord> {
    let mut by_id: BTreeMap<Curie, EntityRecord> = BTreeMap::new();
    for r in records {
        by_id.entry(r.canonical_id.clone()).or_insert(r);
    }
    by_id.into_values().collect()
}

impl Engine {
    pub fn new(
        registry: Arc<Registry>,
        hierarchy: TypeHierarchy,
        resolver: Arc<dyn ResolverProvider>,
        counts: Arc<dyn CountsProvider>,
        transport: Arc<dyn Transport>,
        policy: ExecutionPolicy,
    ) -> Self {
        let metakg = build_metakg(&registry, &hierarchy);
        Self {
            registry,
            hierarchy,
            metakg,
            resolver,
            counts,
            transport,
            policy,
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn metakg(&self) -> &MetaKG {
        &self.metakg
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn policy(&self) -> &ExecutionPolicy {
        &self.policy
    }

    pub fn plan(&self, qg: &QueryGraph) -> QueryPlan {
        plan_query(qg, &self.metakg, &self.hierarchy)
    }

    /// Parse a query document and return its plan.
    pub fn explain(&self, doc: &Value) -> Result<QueryPlan, EngineError> {
        let qg = parse_query(doc)?;
        Ok(self.plan(&qg))
    }

    /// Run a query. An unsatisfiable plan is not an error here: the run has no
    /// results and the plan says which edges failed.
    pub async fn run(&self, qg: &QueryGraph) -> Result<QueryRun, EngineError> {
        let plan = self.plan(qg);
        let mut logs = Vec::new();
        let mut records: BTreeMap<String, Vec<RecordEdge>> = qg.edges.keys().map(|e| (e.clone(), Vec::new())).collect();

        let mut bound: BTreeMap<String, Vec<EntityRecord>> = BTreeMap::new();
        for (node, q) in qg.pinned_nodes() {
            let ids = q.ids.clone().unwrap_or_default();
            let resolved = resolve(&ids, self.resolver.as_ref()).await?;
            bound.insert(node.clone(), dedupe_entities(resolved.into_values()));
        }
        let seeds = bound.clone();

        if !plan.is_satisfiable() {
            logs.push(Diagnostic::new(
                DiagnosticLevel::Warning,
                "Unsatisfiable",
                format!("no operation serves {}", plan.unsatisfiable.join(", ")),
            ));
            return Ok(QueryRun {
                query_graph: qg.clone(),
                plan,
                records,
                results: Vec::new(),
                logs,
            });
        }

        for step in &plan.order.steps {
            let qedge = &qg.edges[&step.qedge_id];
            let other = qedge.other_end(&step.start).to_string();
            let inputs = bound.get(&step.start).cloned().unwrap_or_default();
            let mut found = self
                .run_edge(plan.specs(&step.qedge_id), &inputs, &mut logs)
                .await?;

            if step.constraint {
                let allowed = |node: &str| -> BTreeSet<Curie> {
                    bound.get(node).into_iter().flatten().map(|r| r.canonical_id.clone()).collect()
                };
                let (subjects, objects) = (allowed(&qedge.subject), allowed(&qedge.object));
                found.retain(|r| subjects.contains(&r.subject.canonical_id) && objects.contains(&r.object.canonical_id));
            } else {
                let other_is_subject = qedge.subject == other;
                let reached = found.iter().map(|r| {
                    if other_is_subject {
                        r.subject.clone()
                    } else {
                        r.object.clone()
                    }
                });
                bound.insert(other, dedupe_entities(reached));
            }
            records.insert(step.qedge_id.clone(), found);
        }

        let mut results = assemble(&records, qg, &seeds);
        score_all(&mut results, self.counts.as_ref());
        let results = rank(results);
        Ok(QueryRun {
            query_graph: qg.clone(),
            plan,
            records,
            results,
            logs,
        })
    }

    /// All records for one query edge, deduplicated and sorted.
    async fn run_edge(
        &self,
        specs: &[InvocationSpec],
        inputs: &[EntityRecord],
        logs: &mut Vec<Diagnostic>,
    ) -> Result<Vec<RecordEdge>, EngineError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let mut subqueries: Vec<SubQuery> = Vec::new();
        for spec in specs {
            match build_subqueries(spec, inputs, &self.registry) {
                Ok((sqs, diags)) => {
                    subqueries.extend(sqs);
                    logs.extend(diags);
                }
                Err(e) => logs.push(Diagnostic::new(DiagnosticLevel::Info, "NoUsableInputs", e.to_string())),
            }
        }

        let outcomes = execute(subqueries, self.transport.as_ref(), &self.policy).await;
        let mut raw: Vec<(InvocationSpec, Vec<RawRecord>)> = Vec::new();
        for (sq, outcome) in outcomes {
            let edge = &sq.spec.meta_edge;
            match outcome {
                Outcome::Failure(f) => logs.push(Diagnostic::new(
                    DiagnosticLevel::Warning,
                    "ApiFailure",
                    format!(
                        "{}/{} failed after {} attempt(s): {}",
                        edge.api_id,
                        edge.op_id,
                        f.attempts,
                        serde_json::to_string(&f.kind).unwrap_or_default()
                    ),
                )),
                Outcome::Response { response, .. } => match extract_raw(&response.body, &sq.spec, &sq.inputs, &self.registry)
                {
                    Ok(r) => raw.push((sq.spec, r)),
                    Err(e) => logs.push(Diagnostic::new(
                        DiagnosticLevel::Warning,
                        "MalformedResponse",
                        format!("{}/{}: {e}", edge.api_id, edge.op_id),
                    )),
                },
            }
        }

        // one resolver round for every output id of this edge
        let ids: Vec<Curie> = raw.iter().flat_map(|(_, rs)| rs.iter().map(|r| r.output_id.clone())).collect();
        let resolved = resolve(&ids, self.resolver.as_ref()).await?;
        let mut found: Vec<RecordEdge> = raw
            .into_iter()
            .flat_map(|(spec, rs)| finalize_records(rs, &spec, &self.registry, &resolved))
            .collect();
        found.sort_by(|a, b| a.key().cmp(&b.key()));
        found.dedup_by(|a, b| a.key() == b.key());
        Ok(found)
    }

    /// Parse, run and render a query document.
    pub async fn query_document(&self, doc: &Value) -> Result<Value, EngineError> {
        let qg = parse_query(doc)?;
        let run = self.run(&qg).await?;
        Ok(results_document(&run))
    }

    /// Like [`Engine::query_document`] but an unsatisfiable plan is an error.
    pub async fn query_document_strict(&self, doc: &Value) -> Result<Value, EngineError> {
        let qg = parse_query(doc)?;
        let plan = self.plan(&qg);
        if !plan.is_satisfiable() {
            return Err(EngineError::Unsatisfiable(plan.unsatisfiable));
        }
        let run = self.run(&qg).await?;
        Ok(results_document(&run))
    }
}

fn biolink(name: &str) -> String {
    format!("{BIOLINK}{name}")
}

fn node_document(r: &EntityRecord) -> Value {
    json!({
        "name": r.label,
        "categories": r.semantic_types.iter().map(|t| biolink(t)).collect::<Vec<_>>(),
        "equivalent_identifiers": r.equivalent_ids,
    })
}

fn edge_document(r: &RecordEdge) -> Value {
    let attributes: Vec<Value> = r
        .attributes
        .iter()
        .map(|(k, v)| json!({"attribute_type_id": k, "value": v}))
        .collect();
    json!({
        "subject": r.subject.canonical_id,
        "object": r.object.canonical_id,
        "predicate": biolink(&r.predicate),
        "sources": [{
            "resource_id": r.api_id,
            "operation": r.op_id,
            "source": r.source,
        }],
        "attributes": attributes,
    })
}

/// TRAPI-style results document. Knowledge-graph edge ids are assigned in
/// record order, so identical runs render identical documents.
pub fn results_document(run: &QueryRun) -> Value {
    let mut nodes = Map::new();
    let mut edge_keys: BTreeMap<(String, Curie, Curie, String, String, String), String> = BTreeMap::new();
    let mut edges = Map::new();

    let mut all: Vec<&RecordEdge> = run.results.iter().flat_map(|r| r.edge_bindings.values().flatten()).collect();
    all.sort_by(|a, b| a.key().cmp(&b.key()));
    all.dedup_by(|a, b| a.key() == b.key());
    for (i, r) in all.iter().enumerate() {
        let id = format!("e{i}");
        let (q, s, o, api, op, p) = r.key();
        edge_keys.insert(
            (q.into(), s.clone(), o.clone(), api.into(), op.into(), p.into()),
            id.clone(),
        );
        edges.insert(id, edge_document(r));
    }

    let mut results = Vec::new();
    for res in &run.results {
        let mut node_bindings = Map::new();
        for (qn, entity) in &res.node_bindings {
            nodes
                .entry(entity.canonical_id.to_string())
                .or_insert_with(|| node_document(entity));
            node_bindings.insert(qn.clone(), json!([{"id": entity.canonical_id}]));
        }
        let mut edge_bindings = Map::new();
        for (qe, recs) in &res.edge_bindings {
            let ids: Vec<Value> = recs
                .iter()
                .map(|r| {
                    let (q, s, o, api, op, p) = r.key();
                    let k = (q.to_string(), s.clone(), o.clone(), api.to_string(), op.to_string(), p.to_string());
                    json!({"id": edge_keys[&k]})
                })
                .collect();
            edge_bindings.insert(qe.clone(), Value::Array(ids));
        }
        results.push(json!({
            "node_bindings": node_bindings,
            "edge_bindings": edge_bindings,
            "score": res.score,
        }));
    }

    json!({
        "message": {
            "query_graph": run.query_graph,
            "knowledge_graph": {"nodes": nodes, "edges": edges},
            "results": results,
        },
        "logs": run.logs,
    })
}

/// Canonical text form of a results document, shared by every front end.
pub fn render_document(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

