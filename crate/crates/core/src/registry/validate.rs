use std::collections::BTreeSet;

use super::{AnnotationDocument, Operation, TypeBinding, TypeVocabulary, Violation, ViolationCode};

/// Every invariant and vocabulary violation of `doc`, sorted. Empty iff valid.
pub fn validate_document(doc: &AnnotationDocument, vocab: &TypeVocabulary) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, location: String, message: String| out.push(Violation::new(code, location, message));

    if doc.api_id.trim().is_empty() {
        push(ViolationCode::MissingField, "info/x-api-id".into(), "api id is empty".into());
    }
    if !doc.server_url.is_empty()
        && !(doc.server_url.starts_with("http://") || doc.server_url.starts_with("https://"))
    {
        push(
            ViolationCode::InvalidServerUrl,
            "servers/0/url".into(),
            format!("{:?} is not an http(s) URL", doc.server_url),
        );
    }

    let mut op_ids = BTreeSet::new();
    for op in &doc.operations {
        if !op_ids.insert(op.op_id.as_str()) {
            push(
                ViolationCode::DuplicateOperationId,
                format!("operations/{}", op.op_id),
                format!("operation id {:?} appears more than once", op.op_id),
            );
        }
        validate_operation(op, doc, vocab, &mut push);
    }

    for (name, mapping) in &doc.response_mappings {
        for ns in mapping.id_paths.keys() {
            if !vocab.has_namespace(ns) {
                push(
                    ViolationCode::UnknownNamespace,
                    format!("response_mappings/{name}/{ns}"),
                    format!("id namespace {ns:?} is not in the vocabulary"),
                );
            }
        }
    }

    out.sort();
    out.dedup();
    out
}

fn validate_operation(
    op: &Operation,
    doc: &AnnotationDocument,
    vocab: &TypeVocabulary,
    push: &mut impl FnMut(ViolationCode, String, String),
) {
    let loc = format!("operations/{}", op.op_id);

    for (side, bindings, empty_code) in [
        ("inputs", &op.inputs, ViolationCode::EmptyInputs),
        ("outputs", &op.outputs, ViolationCode::EmptyOutputs),
    ] {
        let at = format!("{loc}/{side}");
        if bindings.is_empty() {
            push(empty_code, at.clone(), format!("{side} must be non-empty"));
        }
        let mut seen_types = BTreeSet::new();
        for b in bindings {
            check_binding(b, vocab, &at, push);
            if !seen_types.insert(b.semantic_type.as_str()) {
                push(
                    ViolationCode::DuplicateBindingType,
                    at.clone(),
                    format!("semantic type {:?} bound more than once", b.semantic_type),
                );
            }
        }
    }

    if op.predicate.trim().is_empty() {
        push(ViolationCode::EmptyPredicate, format!("{loc}/predicate"), "predicate is empty".into());
    }
    if op.source.trim().is_empty() {
        push(ViolationCode::MissingField, format!("{loc}/source"), "source is empty".into());
    }

    match (op.support_batch, op.batch_size) {
        (false, Some(_)) => push(
            ViolationCode::BatchSizeWithoutBatch,
            format!("{loc}/batchSize"),
            "batchSize given but supportBatch is false".into(),
        ),
        (true, Some(0)) => push(
            ViolationCode::InvalidBatchSize,
            format!("{loc}/batchSize"),
            "batchSize must be positive".into(),
        ),
        _ => {}
    }
    if op.support_batch && op.batch_separator.is_empty() {
        push(
            ViolationCode::InvalidField,
            format!("{loc}/batchSeparator"),
            "batchSeparator must be non-empty".into(),
        );
    }

    if !op.templates().any(|t| t.references_input()) {
        push(
            ViolationCode::MissingInputPlaceholder,
            loc.clone(),
            "no template references { queryInputs }".into(),
        );
    }
    for t in op.templates() {
        for p in t.placeholders() {
            for f in &p.filters {
                if f.known().is_none() {
                    push(
                        ViolationCode::UnknownFilter,
                        loc.clone(),
                        format!("unknown filter {f} in template {t}"),
                    );
                }
            }
        }
    }

    if !doc.response_mappings.contains_key(&op.response_mapping_ref) {
        push(
            ViolationCode::DanglingMappingRef,
            format!("{loc}/response_mapping"),
            format!("response mapping {:?} is not defined", op.response_mapping_ref),
        );
    }
}

fn check_binding(
    b: &TypeBinding,
    vocab: &TypeVocabulary,
    at: &str,
    push: &mut impl FnMut(ViolationCode, String, String),
) {
    if b.semantic_type.is_empty() || b.id_namespace.is_empty() {
        push(
            ViolationCode::EmptyBinding,
            at.to_string(),
            "binding needs both `id` and `semantic`".into(),
        );
        return;
    }
    if !vocab.has_type(&b.semantic_type) {
        push(
            ViolationCode::UnknownSemanticType,
            at.to_string(),
            format!("semantic type {:?} is not in the vocabulary", b.semantic_type),
        );
    }
    if !vocab.has_namespace(&b.id_namespace) {
        push(
            ViolationCode::UnknownNamespace,
            at.to_string(),
            format!("id namespace {:?} is not in the vocabulary", b.id_namespace),
        );
    }
}
