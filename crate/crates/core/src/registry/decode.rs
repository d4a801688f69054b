//! Structural decoding of annotation documents into the typed model, and the
//! inverse normalized encoding.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::{
    path_parameter_names, AnnotationDocument, FieldPath, Method, Operation, ResponseMapping,
    SourceDocument, Template, TypeBinding, Violation, ViolationCode, DEFAULT_BATCH_SEPARATOR,
    INPUT_PATH_KEY, MAPPING_EXT, OPERATIONS_EXT,
};

const OPS_REF_PREFIX: &str = "#/components/x-bte-kgs-operations/";
const MAPPING_REF_PREFIX: &str = "#/components/x-bte-response-mapping/";

/// Strip a `biolink:` prefix from type and predicate names.
pub(crate) fn strip_biolink(s: &str) -> &str {
    s.strip_prefix("biolink:").unwrap_or(s)
}

struct Decoder {
    violations: Vec<Violation>,
}

impl Decoder {
    fn push(&mut self, code: ViolationCode, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation::new(code, location, message));
    }
}

pub(super) fn decode(source: &SourceDocument) -> (Option<AnnotationDocument>, Vec<Violation>) {
    let mut d = Decoder {
        violations: Vec::new(),
    };
    let Some(root) = source.value.as_object() else {
        d.push(ViolationCode::InvalidField, "", "document root must be a mapping");
        return (None, d.violations);
    };

    let info = root.get("info").and_then(Value::as_object);
    let api_id = info
        .and_then(|i| i.get("x-api-id"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .or_else(|| source.name.clone())
        .unwrap_or_default();
    let title = match info.and_then(|i| i.get("title")).and_then(Value::as_str) {
        Some(t) => t.to_string(),
        None => {
            d.push(ViolationCode::MissingField, "info/title", "missing info.title");
            String::new()
        }
    };
    let server_url = match root
        .get("servers")
        .and_then(Value::as_array)
        .and_then(|s| s.first())
        .and_then(|s| s.get("url"))
        .and_then(Value::as_str)
    {
        Some(u) => u.to_string(),
        None => {
            d.push(ViolationCode::MissingField, "servers/0/url", "missing server url");
            String::new()
        }
    };

    let components = root.get("components").and_then(Value::as_object);
    let response_mappings = decode_mappings(&mut d, components.and_then(|c| c.get(MAPPING_EXT)));
    let op_components = components
        .and_then(|c| c.get(OPERATIONS_EXT))
        .and_then(Value::as_object);

    let mut operations = Vec::new();
    if let Some(paths) = root.get("paths") {
        let Some(paths) = paths.as_object() else {
            d.push(ViolationCode::InvalidField, "paths", "paths must be a mapping");
            return (None, d.violations);
        };
        for (path_key, item) in paths {
            let Some(item) = item.as_object() else { continue };
            for (method_key, op_obj) in item {
                let Some(ext) = op_obj.get(OPERATIONS_EXT) else { continue };
                let location = format!("paths/{path_key}/{method_key}");
                let method = match method_key.to_ascii_lowercase().as_str() {
                    "get" => Method::Get,
                    "post" => Method::Post,
                    other => {
                        d.push(
                            ViolationCode::UnsupportedMethod,
                            &location,
                            format!("method {other:?} is not supported (GET or POST only)"),
                        );
                        continue;
                    }
                };
                let Some(items) = ext.as_array() else {
                    d.push(ViolationCode::InvalidField, &location, format!("{OPERATIONS_EXT} must be a list"));
                    continue;
                };
                for (i, item) in items.iter().enumerate() {
                    for (op_id, entry) in resolve_entries(&mut d, op_components, item, &location, method, path_key, i) {
                        operations.push(decode_operation(&mut d, entry, op_id, method, path_key));
                    }
                }
            }
        }
    }

    let doc = AnnotationDocument {
        api_id,
        title,
        server_url,
        operations,
        response_mappings,
    };
    (Some(doc), d.violations)
}

/// Expand one list item under a path's operation extension into (op id, entry) pairs.
fn resolve_entries<'a>(
    d: &mut Decoder,
    components: Option<&'a Map<String, Value>>,
    item: &'a Value,
    location: &str,
    method: Method,
    path_key: &str,
    index: usize,
) -> Vec<(String, &'a Map<String, Value>)> {
    let Some(obj) = item.as_object() else {
        d.push(ViolationCode::InvalidField, location, "operation entry must be a mapping");
        return Vec::new();
    };
    let Some(reference) = obj.get("$ref") else {
        let sanitized: String = path_key
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let op_id = format!("{}{}_{index}", method.as_str().to_ascii_lowercase(), sanitized);
        return vec![(op_id, obj)];
    };
    let name = reference
        .as_str()
        .and_then(|r| r.strip_prefix(OPS_REF_PREFIX))
        .unwrap_or_default();
    let target = components.and_then(|c| c.get(name)).filter(|_| !name.is_empty());
    let entries: Vec<&Map<String, Value>> = match target {
        Some(Value::Array(list)) => list.iter().filter_map(Value::as_object).collect(),
        Some(Value::Object(single)) => vec![single],
        _ => {
            d.push(
                ViolationCode::DanglingOperationRef,
                location,
                format!("operation reference {reference} does not resolve"),
            );
            return Vec::new();
        }
    };
    let n = entries.len();
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let op_id = if n == 1 { name.to_string() } else { format!("{name}_{i}") };
            (op_id, e)
        })
        .collect()
}

fn decode_bindings(d: &mut Decoder, v: Option<&Value>, location: &str) -> Vec<TypeBinding> {
    match v {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| {
                let field = |k: &str| item.get(k).and_then(Value::as_str).unwrap_or_default();
                TypeBinding::new(strip_biolink(field("semantic")), field("id"))
            })
            .collect(),
        Some(_) => {
            d.push(ViolationCode::InvalidField, location, "expected a list of {id, semantic}");
            Vec::new()
        }
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(_) | Value::Bool(_) => Some(v.to_string()),
        _ => None,
    }
}

fn decode_template_map(
    d: &mut Decoder,
    v: Option<&Value>,
    location: &str,
) -> Option<BTreeMap<String, Template>> {
    let obj = match v? {
        Value::Object(obj) => obj,
        _ => {
            d.push(ViolationCode::InvalidField, location, "expected a mapping of name -> template");
            return Some(BTreeMap::new());
        }
    };
    let mut out = BTreeMap::new();
    for (name, raw) in obj {
        let Some(text) = scalar_text(raw) else {
            d.push(ViolationCode::InvalidField, format!("{location}/{name}"), "template must be a scalar");
            continue;
        };
        match Template::compile(&text) {
            Ok(t) => {
                out.insert(name.clone(), t);
            }
            Err(e) => d.push(ViolationCode::TemplateSyntax, format!("{location}/{name}"), e.to_string()),
        }
    }
    Some(out)
}

fn decode_operation(
    d: &mut Decoder,
    entry: &Map<String, Value>,
    op_id: String,
    method: Method,
    path_key: &str,
) -> Operation {
    let loc = format!("operations/{op_id}");
    let inputs = decode_bindings(d, entry.get("inputs"), &format!("{loc}/inputs"));
    let outputs = decode_bindings(d, entry.get("outputs"), &format!("{loc}/outputs"));
    let predicate = strip_biolink(entry.get("predicate").and_then(Value::as_str).unwrap_or_default()).to_string();
    let parameters = decode_template_map(d, entry.get("parameters"), &format!("{loc}/parameters")).unwrap_or_default();
    let request_body = decode_template_map(d, entry.get("requestBody"), &format!("{loc}/requestBody"));

    let support_batch = match entry.get("supportBatch") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            d.push(ViolationCode::InvalidField, format!("{loc}/supportBatch"), "supportBatch must be a boolean");
            false
        }
    };
    let batch_size = match entry.get("batchSize") {
        None => None,
        Some(v) => match v.as_u64() {
            Some(n) => Some(n as usize),
            None => {
                d.push(
                    ViolationCode::InvalidBatchSize,
                    format!("{loc}/batchSize"),
                    format!("batchSize must be a positive integer, got {v}"),
                );
                None
            }
        },
    };
    let batch_separator = entry
        .get("batchSeparator")
        .and_then(Value::as_str)
        .unwrap_or(DEFAULT_BATCH_SEPARATOR)
        .to_string();
    let source = entry.get("source").and_then(Value::as_str).unwrap_or_default().to_string();

    let response_mapping_ref = match entry.get("response_mapping") {
        Some(Value::Object(o)) => {
            let r = o.get("$ref").and_then(Value::as_str).unwrap_or_default();
            r.strip_prefix(MAPPING_REF_PREFIX).unwrap_or(r).to_string()
        }
        Some(Value::String(s)) => s.strip_prefix(MAPPING_REF_PREFIX).unwrap_or(s).to_string(),
        _ => {
            d.push(ViolationCode::MissingField, format!("{loc}/response_mapping"), "missing response_mapping");
            String::new()
        }
    };

    let mut path_source = path_key.to_string();
    for name in path_parameter_names(path_key) {
        let replacement = match parameters.get(name) {
            Some(t) => t.to_source(),
            None => {
                d.push(
                    ViolationCode::MissingField,
                    format!("{loc}/parameters/{name}"),
                    format!("path parameter {name:?} has no template"),
                );
                String::new()
            }
        };
        path_source = path_source.replacen(&format!("{{{name}}}"), &replacement, 1);
    }
    let path_template = match Template::compile(&path_source) {
        Ok(t) => t,
        Err(e) => {
            d.push(ViolationCode::TemplateSyntax, format!("{loc}/path"), e.to_string());
            Template::literal(path_key)
        }
    };

    Operation {
        op_id,
        inputs,
        outputs,
        predicate,
        parameters,
        request_body,
        support_batch,
        batch_size,
        batch_separator,
        source,
        response_mapping_ref,
        method,
        path: path_key.to_string(),
        path_template,
    }
}

fn decode_mappings(d: &mut Decoder, v: Option<&Value>) -> BTreeMap<String, ResponseMapping> {
    let mut out = BTreeMap::new();
    let Some(v) = v else { return out };
    let Some(obj) = v.as_object() else {
        d.push(ViolationCode::InvalidField, MAPPING_EXT, "response mappings must be a mapping");
        return out;
    };
    for (name, body) in obj {
        let loc = format!("response_mappings/{name}");
        let Some(fields) = body.as_object() else {
            d.push(ViolationCode::InvalidField, &loc, "response mapping must be a mapping");
            continue;
        };
        let mut mapping = ResponseMapping::default();
        for (key, raw) in fields {
            let parsed = raw
                .as_str()
                .ok_or_else(|| "path must be a string".to_string())
                .and_then(|s| FieldPath::parse(s).map_err(|e| e.to_string()));
            let path = match parsed {
                Ok(p) => p,
                Err(reason) => {
                    d.push(ViolationCode::InvalidPath, format!("{loc}/{key}"), reason);
                    continue;
                }
            };
            if key == INPUT_PATH_KEY {
                mapping.input_path = Some(path);
            } else if key.contains(':') {
                mapping.attribute_paths.insert(key.clone(), path);
            } else {
                mapping.id_paths.insert(key.clone(), path);
            }
        }
        out.insert(name.clone(), mapping);
    }
    out
}

fn encode_bindings(bindings: &[TypeBinding]) -> Value {
    Value::Array(
        bindings
            .iter()
            .map(|b| json!({"id": b.id_namespace, "semantic": b.semantic_type}))
            .collect(),
    )
}

fn encode_templates(map: &BTreeMap<String, Template>) -> Value {
    Value::Object(map.iter().map(|(k, t)| (k.clone(), Value::String(t.to_source()))).collect())
}

pub(super) fn encode(doc: &AnnotationDocument) -> Value {
    let mut paths: BTreeMap<String, Map<String, Value>> = BTreeMap::new();
    let mut op_components = Map::new();
    for op in &doc.operations {
        let method = op.method.as_str().to_ascii_lowercase();
        let entry = paths
            .entry(op.path.clone())
            .or_default()
            .entry(method)
            .or_insert_with(|| json!({ OPERATIONS_EXT: [] }));
        entry[OPERATIONS_EXT]
            .as_array_mut()
            .expect("list")
            .push(json!({"$ref": format!("{OPS_REF_PREFIX}{}", op.op_id)}));

        let mut body = Map::new();
        body.insert("supportBatch".into(), Value::Bool(op.support_batch));
        if let Some(n) = op.batch_size {
            body.insert("batchSize".into(), json!(n));
        }
        if op.batch_separator != DEFAULT_BATCH_SEPARATOR {
            body.insert("batchSeparator".into(), json!(op.batch_separator));
        }
        body.insert("useTemplating".into(), Value::Bool(true));
        body.insert("inputs".into(), encode_bindings(&op.inputs));
        body.insert("parameters".into(), encode_templates(&op.parameters));
        if let Some(rb) = &op.request_body {
            body.insert("requestBody".into(), encode_templates(rb));
        }
        body.insert("outputs".into(), encode_bindings(&op.outputs));
        body.insert("predicate".into(), json!(op.predicate));
        body.insert("source".into(), json!(op.source));
        body.insert(
            "response_mapping".into(),
            json!({"$ref": format!("{MAPPING_REF_PREFIX}{}", op.response_mapping_ref)}),
        );
        op_components.insert(op.op_id.clone(), Value::Array(vec![Value::Object(body)]));
    }

    let mappings: Map<String, Value> = doc
        .response_mappings
        .iter()
        .map(|(name, m)| {
            let mut fields = Map::new();
            for (k, p) in m.id_paths.iter().chain(&m.attribute_paths) {
                fields.insert(k.clone(), json!(p.to_string()));
            }
            if let Some(p) = &m.input_path {
                fields.insert(INPUT_PATH_KEY.into(), json!(p.to_string()));
            }
            (name.clone(), Value::Object(fields))
        })
        .collect();

    json!({
        "openapi": "3.0.3",
        "info": {"title": doc.title, "x-api-id": doc.api_id},
        "servers": [{"url": doc.server_url}],
        "paths": paths,
        "components": {
            OPERATIONS_EXT: op_components,
            MAPPING_EXT: mappings,
        }
    })
}
