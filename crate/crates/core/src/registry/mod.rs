//! Annotated API registry.
//!
//! Each API is described by an OpenAPI document carrying two vendor extensions:
//! `x-bte-kgs-operations` (what an endpoint links, and how to call it) and
//! `x-bte-response-mapping` (where output identifiers live in the response).
//! Only `info`, `servers`, `paths` and those extensions are read; the rest of the
//! OpenAPI document is ignored.

pub(crate) mod decode;
mod path;
mod template;
mod validate;
mod vocabulary;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use path::{scalar_string, FieldPath, InvalidPath};
pub use template::{
    apply_filter_chain, compile_template, FilterCall, FilterContext, KnownFilter, Placeholder,
    PlaceholderSource, Segment, Template, TemplateSyntax,
};
pub use validate::validate_document;
pub use vocabulary::TypeVocabulary;

pub const OPERATIONS_EXT: &str = "x-bte-kgs-operations";
pub const MAPPING_EXT: &str = "x-bte-response-mapping";
pub const DEFAULT_BATCH_SEPARATOR: &str = ",";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TypeBinding {
    pub semantic_type: String,
    pub id_namespace: String,
}

impl TypeBinding {
    pub fn new(semantic_type: impl Into<String>, id_namespace: impl Into<String>) -> Self {
        Self {
            semantic_type: semantic_type.into(),
            id_namespace: id_namespace.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    #[serde(alias = "get")]
    Get,
    #[serde(alias = "post")]
    Post,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One association-retrieval capability of an API.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Operation {
    pub op_id: String,
    pub inputs: Vec<TypeBinding>,
    pub outputs: Vec<TypeBinding>,
    pub predicate: String,
    /// All declared parameters. Those named by a `{name}` segment of `path` are
    /// substituted into the path; the rest are sent as query parameters.
    pub parameters: BTreeMap<String, Template>,
    /// JSON object body for POST operations; each field value is a template.
    pub request_body: Option<BTreeMap<String, Template>>,
    pub support_batch: bool,
    pub batch_size: Option<usize>,
    pub batch_separator: String,
    pub source: String,
    pub response_mapping_ref: String,
    pub method: Method,
    /// OpenAPI path key, e.g. `/entity/litvar/{variantid}`.
    pub path: String,
    pub path_template: Template,
}

impl Operation {
    pub fn query_parameters(&self) -> impl Iterator<Item = (&String, &Template)> {
        let in_path = path_parameter_names(&self.path);
        self.parameters
            .iter()
            .filter(move |(name, _)| !in_path.contains(name.as_str()))
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        std::iter::once(&self.path_template)
            .chain(self.parameters.values())
            .chain(self.request_body.iter().flat_map(|b| b.values()))
    }
}

/// `{name}` segments of an OpenAPI path key.
pub(crate) fn path_parameter_names(path: &str) -> BTreeSet<&str> {
    let mut names = BTreeSet::new();
    let mut rest = path;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                names.insert(after[..close].trim());
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    names
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ResponseMapping {
    /// Output id namespace -> path to the bare identifier values.
    pub id_paths: BTreeMap<String, FieldPath>,
    /// Any other key (e.g. `biolink:source_web_page`) -> path, passed through opaquely.
    pub attribute_paths: BTreeMap<String, FieldPath>,
    /// For batch responses shaped as a list of per-input objects: the path, within
    /// each element, to the input value that element answers.
    pub input_path: Option<FieldPath>,
}

pub const INPUT_PATH_KEY: &str = "$input";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationDocument {
    pub api_id: String,
    pub title: String,
    pub server_url: String,
    pub operations: Vec<Operation>,
    pub response_mappings: BTreeMap<String, ResponseMapping>,
}

impl AnnotationDocument {
    pub fn operation(&self, op_id: &str) -> Option<&Operation> {
        self.operations.iter().find(|op| op.op_id == op_id)
    }

    /// Normalized OpenAPI form; parsing it yields an equal document.
    pub fn to_document(&self) -> Value {
        decode::encode(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ViolationCode {
    MissingField,
    InvalidField,
    InvalidServerUrl,
    UnsupportedMethod,
    DuplicateApiId,
    DuplicateOperationId,
    DanglingOperationRef,
    DanglingMappingRef,
    UnknownSemanticType,
    UnknownNamespace,
    EmptyInputs,
    EmptyOutputs,
    EmptyBinding,
    DuplicateBindingType,
    EmptyPredicate,
    BatchSizeWithoutBatch,
    InvalidBatchSize,
    MissingInputPlaceholder,
    TemplateSyntax,
    UnknownFilter,
    InvalidPath,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Where in the document, e.g. `operations/variant_located_in_gene/inputs`.
    pub location: String,
    pub message: String,
}

impl Violation {
    pub fn new(code: ViolationCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.code, self.location, self.message)
    }
}

/// A structured document plus an optional name hint (the file stem) used as
/// the API id when the document does not declare `info.x-api-id`.
#[derive(Debug, Clone)]
pub struct SourceDocument {
    pub name: Option<String>,
    pub value: Value,
}

impl SourceDocument {
    pub fn new(value: Value) -> Self {
        Self { name: None, value }
    }

    pub fn named(name: impl Into<String>, value: Value) -> Self {
        Self {
            name: Some(name.into()),
            value,
        }
    }

    /// Parse YAML or JSON text.
    pub fn from_text(name: Option<String>, text: &str) -> Result<Self, String> {
        let value: Value = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
        Ok(Self { name, value })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvalidDocument {
    pub api_id: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{} invalid document(s): {}", .0.len(), summarize(.0))]
    DocumentInvalid(Vec<InvalidDocument>),
}

fn summarize(docs: &[InvalidDocument]) -> String {
    docs.iter()
        .map(|d| {
            let codes: Vec<String> = d.violations.iter().map(|v| format!("{:?}", v.code)).collect();
            format!("{} [{}]", d.api_id, codes.join(", "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Decode and validate one document, returning every violation found.
pub fn check_document(
    source: &SourceDocument,
    vocab: &TypeVocabulary,
) -> (Option<AnnotationDocument>, Vec<Violation>) {
    let (doc, mut violations) = decode::decode(source);
    if let Some(doc) = &doc {
        violations.extend(validate_document(doc, vocab));
    }
    violations.sort();
    violations.dedup();
    (doc, violations)
}

/// Immutable catalog of annotated APIs.
#[derive(Debug, Clone)]
pub struct Registry {
    vocabulary: TypeVocabulary,
    documents: Vec<AnnotationDocument>,
}

impl Registry {
    /// Parse and validate every document. Violations are collected across all
    /// documents; any violation rejects the registry.
    pub fn parse(sources: &[SourceDocument], vocabulary: TypeVocabulary) -> Result<Self, RegistryError> {
        let mut invalid = Vec::new();
        let mut documents: Vec<AnnotationDocument> = Vec::new();
        let mut seen = BTreeSet::new();

        for (i, source) in sources.iter().enumerate() {
            let (doc, mut violations) = check_document(source, &vocabulary);
            let api_id = doc
                .as_ref()
                .map(|d| d.api_id.clone())
                .or_else(|| source.name.clone())
                .unwrap_or_else(|| format!("#{i}"));
            if doc.is_some() && !seen.insert(api_id.clone()) {
                violations.push(Violation::new(
                    ViolationCode::DuplicateApiId,
                    "info/x-api-id",
                    format!("api id {api_id:?} declared by more than one document"),
                ));
            }
            match doc {
                Some(doc) if violations.is_empty() => documents.push(doc),
                _ => invalid.push(InvalidDocument { api_id, violations }),
            }
        }

        if !invalid.is_empty() {
            return Err(RegistryError::DocumentInvalid(invalid));
        }
        documents.sort_by(|a, b| a.api_id.cmp(&b.api_id));
        Ok(Self {
            vocabulary,
            documents,
        })
    }

    pub fn empty(vocabulary: TypeVocabulary) -> Self {
        Self {
            vocabulary,
            documents: Vec::new(),
        }
    }

    /// Load every `*.yaml|*.yml|*.json` in `dir` except `vocabulary.yaml` and
    /// `hierarchy.yaml`. The vocabulary comes from `dir/vocabulary.yaml` when
    /// present, otherwise the built-in standard vocabulary.
    pub fn load_dir(dir: &Path) -> Result<Self, RegistryError> {
        let vocab_path = dir.join("vocabulary.yaml");
        let vocabulary = if vocab_path.exists() {
            TypeVocabulary::load(&vocab_path)?
        } else {
            TypeVocabulary::standard()
        };
        let sources = read_sources(dir)?;
        Self::parse(&sources, vocabulary)
    }

    pub fn vocabulary(&self) -> &TypeVocabulary {
        &self.vocabulary
    }

    pub fn documents(&self) -> &[AnnotationDocument] {
        &self.documents
    }

    pub fn document(&self, api_id: &str) -> Option<&AnnotationDocument> {
        self.documents.iter().find(|d| d.api_id == api_id)
    }

    pub fn operation(&self, api_id: &str, op_id: &str) -> Option<(&AnnotationDocument, &Operation)> {
        let doc = self.document(api_id)?;
        Some((doc, doc.operation(op_id)?))
    }

    pub fn api_count(&self) -> usize {
        self.documents.len()
    }

    pub fn operation_count(&self) -> usize {
        self.documents.iter().map(|d| d.operations.len()).sum()
    }

    pub fn to_documents(&self) -> Vec<Value> {
        self.documents.iter().map(AnnotationDocument::to_document).collect()
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, RegistryError> {
    std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// API annotation files of a registry directory, sorted by file name.
pub fn read_sources(dir: &Path) -> Result<Vec<SourceDocument>, RegistryError> {
    let io = |source| RegistryError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            matches!(ext, "yaml" | "yml" | "json") && !matches!(stem, "vocabulary" | "hierarchy")
        })
        .collect();
    paths.sort();

    paths
        .into_iter()
        .map(|path| {
            let text = read_text(&path)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).map(str::to_string);
            SourceDocument::from_text(stem, &text).map_err(|reason| RegistryError::Format { path, reason })
        })
        .collect()
}
