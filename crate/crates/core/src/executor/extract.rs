use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::Value;

use super::InputBinding;
use crate::curie::Curie;
use crate::planner::{Direction, InvocationSpec};
use crate::registry::{FieldPath, Registry, ResponseMapping};
use crate::resolve::{resolve, EntityRecord, ResolverError, ResolverProvider};

/// One retrieved association between two resolved entities, oriented from the
/// query edge's subject to its object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordEdge {
    pub subject: EntityRecord,
    pub predicate: String,
    pub object: EntityRecord,
    pub api_id: String,
    pub op_id: String,
    pub source: String,
    pub attributes: BTreeMap<String, Value>,
    pub qedge_id: String,
}

impl RecordEdge {
    pub fn endpoints(&self) -> (&Curie, &Curie) {
        (&self.subject.canonical_id, &self.object.canonical_id)
    }

    /// Identity used to drop duplicate records.
    pub fn key(&self) -> (&str, &Curie, &Curie, &str, &str, &str) {
        (
            &self.qedge_id,
            &self.subject.canonical_id,
            &self.object.canonical_id,
            &self.api_id,
            &self.op_id,
            &self.predicate,
        )
    }
}

/// An extracted association whose output id is not yet resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawRecord {
    pub input: EntityRecord,
    pub output_id: Curie,
    pub attributes: BTreeMap<String, Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("operation {0} has no response mapping")]
    NoMapping(String),
    #[error(transparent)]
    Resolver(#[from] ResolverError),
}

fn mapping_for<'r>(spec: &InvocationSpec, registry: &'r Registry) -> Result<&'r ResponseMapping, ExtractError> {
    let e = &spec.meta_edge;
    registry
        .operation(&e.api_id, &e.op_id)
        .and_then(|(doc, op)| doc.response_mappings.get(&op.response_mapping_ref))
        .ok_or_else(|| ExtractError::NoMapping(format!("{}/{}", e.api_id, e.op_id)))
}

fn attribute_value(path: &FieldPath, scope: &Value) -> Option<Value> {
    let mut values: Vec<Value> = path.evaluate(scope).into_iter().cloned().collect();
    match values.len() {
        0 => None,
        1 => values.pop(),
        _ => Some(Value::Array(values)),
    }
}

/// Evaluate the mapping against one scope of the response and pair every
/// extracted output id with every input in `inputs`.
fn extract_scope(mapping: &ResponseMapping, scope: &Value, inputs: &[&EntityRecord], out: &mut Vec<RawRecord>) {
    let mut outputs: Vec<Curie> = Vec::new();
    for (namespace, path) in &mapping.id_paths {
        for value in path.scalars(scope) {
            if let Ok(id) = Curie::from_parts(namespace, &value) {
                if !outputs.contains(&id) {
                    outputs.push(id);
                }
            }
        }
    }
    let attributes: BTreeMap<String, Value> = mapping
        .attribute_paths
        .iter()
        .filter_map(|(name, path)| attribute_value(path, scope).map(|v| (name.clone(), v)))
        .collect();
    for input in inputs {
        for id in &outputs {
            out.push(RawRecord {
                input: (*input).clone(),
                output_id: id.clone(),
                attributes: attributes.clone(),
            });
        }
    }
}

/// Apply the operation's response mapping to a response body.
///
/// When the mapping declares an input path and the body is a list, each element
/// is attributed to the input whose value it echoes; otherwise every extracted
/// id pairs with every input of the sub-query. Missing paths yield nothing.
pub fn extract_raw(
    body: &str,
    spec: &InvocationSpec,
    inputs: &[InputBinding],
    registry: &Registry,
) -> Result<Vec<RawRecord>, ExtractError> {
    let doc: Value = serde_json::from_str(body).map_err(|e| ExtractError::MalformedResponse(e.to_string()))?;
    let mapping = mapping_for(spec, registry)?;

    let mut unique_inputs: Vec<&EntityRecord> = Vec::new();
    let mut seen = BTreeSet::new();
    for b in inputs {
        if seen.insert(&b.record.canonical_id) {
            unique_inputs.push(&b.record);
        }
    }

    let mut out = Vec::new();
    match (&mapping.input_path, &doc) {
        (Some(input_path), Value::Array(elements)) => {
            for element in elements {
                let echoed = input_path.scalars(element);
                let mut matched: Vec<&EntityRecord> = Vec::new();
                for b in inputs {
                    let prefixed = format!("{}:{}", spec.input_namespace, b.value);
                    let hit = echoed.iter().any(|e| *e == b.value || *e == prefixed);
                    if hit && !matched.iter().any(|r| r.canonical_id == b.record.canonical_id) {
                        matched.push(&b.record);
                    }
                }
                extract_scope(mapping, element, &matched, &mut out);
            }
        }
        _ => extract_scope(mapping, &doc, &unique_inputs, &mut out),
    }
    Ok(out)
}

/// Attach resolved output entities and orient each record along the query edge.
pub fn finalize_records(
    raw: Vec<RawRecord>,
    spec: &InvocationSpec,
    registry: &Registry,
    resolved: &BTreeMap<Curie, EntityRecord>,
) -> Vec<RecordEdge> {
    let edge = &spec.meta_edge;
    let source = registry
        .operation(&edge.api_id, &edge.op_id)
        .map(|(_, op)| op.source.clone())
        .unwrap_or_default();
    raw.into_iter()
        .map(|r| {
            let mut input = r.input;
            if input.semantic_types.is_empty() {
                input.semantic_types.push(edge.subject_type.clone());
            }
            let mut output = resolved
                .get(&r.output_id)
                .cloned()
                .unwrap_or_else(|| EntityRecord::self_record(&r.output_id));
            if output.semantic_types.is_empty() {
                output.semantic_types.push(edge.object_type.clone());
            }
            let (subject, object) = match spec.direction {
                Direction::Forward => (input, output),
                Direction::Reverse => (output, input),
            };
            RecordEdge {
                subject,
                predicate: edge.predicate.clone(),
                object,
                api_id: edge.api_id.clone(),
                op_id: edge.op_id.clone(),
                source: source.clone(),
                attributes: r.attributes,
                qedge_id: spec.qedge_id.clone(),
            }
        })
        .collect()
}

/// [`extract_raw`], resolve the output ids, then [`finalize_records`].
pub async fn extract_records(
    body: &str,
    spec: &InvocationSpec,
    inputs: &[InputBinding],
    registry: &Registry,
    resolver: &dyn ResolverProvider,
) -> Result<Vec<RecordEdge>, ExtractError> {
    let raw = extract_raw(body, spec, inputs, registry)?;
    let ids: Vec<Curie> = raw.iter().map(|r| r.output_id.clone()).collect();
    let resolved = resolve(&ids, resolver).await?;
    Ok(finalize_records(raw, spec, registry, &resolved))
}
