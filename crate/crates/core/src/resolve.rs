//! Identifier resolution: map a CURIE to an entity record carrying every
//! equivalent identifier, so one API's outputs can feed another API that uses
//! a different namespace.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::curie::Curie;
use crate::executor::{HttpRequestSpec, Transport};
use crate::registry::Method;

pub const DEFAULT_RESOLVER_BATCH: usize = 1000;

/// Namespace preference used to pick canonical ids.
pub const DEFAULT_NAMESPACE_PRIORITY: &[&str] = &[
    "MONDO",
    "DOID",
    "OMIM",
    "MESH",
    "NCBIGene",
    "HGNC",
    "ENSEMBL",
    "UniProtKB",
    "DBSNP",
    "CHEBI",
    "PUBCHEM.COMPOUND",
    "CHEMBL.COMPOUND",
    "DRUGBANK",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub canonical_id: Curie,
    pub equivalent_ids: Vec<Curie>,
    pub label: String,
    pub semantic_types: Vec<String>,
}

impl EntityRecord {
    /// The record for an id nobody knows: itself only, labelled with itself.
    pub fn self_record(id: &Curie) -> Self {
        Self {
            canonical_id: id.clone(),
            equivalent_ids: vec![id.clone()],
            label: id.to_string(),
            semantic_types: Vec::new(),
        }
    }

    pub fn aliases_in_namespace(&self, namespace: &str) -> Vec<String> {
        aliases_in_namespace(self, namespace)
    }
}

/// Bare values of the record's ids in `namespace`, in record order.
pub fn aliases_in_namespace(record: &EntityRecord, namespace: &str) -> Vec<String> {
    record
        .equivalent_ids
        .iter()
        .filter(|id| id.prefix() == namespace)
        .map(|id| id.reference().to_string())
        .collect()
}

/// First id under the highest-priority namespace; ties and unlisted namespaces
/// fall back to lexicographic order.
pub fn select_canonical<'a>(ids: &'a [Curie], priority: &[String]) -> Option<&'a Curie> {
    let rank = |c: &Curie| {
        priority
            .iter()
            .position(|p| p == c.prefix())
            .unwrap_or(priority.len())
    };
    ids.iter().min_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)))
}

pub fn default_priority() -> Vec<String> {
    DEFAULT_NAMESPACE_PRIORITY.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum ResolverError {
    #[error("resolver unavailable: {0}")]
    Unavailable(String),
    #[error("resolver fixture line {line}: {reason}")]
    Fixture { line: usize, reason: String },
    #[error("cannot read resolver fixture {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Batch identifier lookup. Ids the provider does not know may be omitted from
/// the result; [`resolve`] fills them with self-records.
#[async_trait]
pub trait ResolverProvider: Send + Sync {
    async fn resolve_batch(&self, ids: &[Curie]) -> Result<HashMap<Curie, EntityRecord>, ResolverError>;
}

#[async_trait]
impl<T: ResolverProvider + ?Sized> ResolverProvider for Arc<T> {
    async fn resolve_batch(&self, ids: &[Curie]) -> Result<HashMap<Curie, EntityRecord>, ResolverError> {
        (**self).resolve_batch(ids).await
    }
}

/// Resolve every id, calling the provider in chunks of at most `batch_size`.
pub async fn resolve_batched(
    ids: &[Curie],
    provider: &dyn ResolverProvider,
    batch_size: usize,
) -> Result<BTreeMap<Curie, EntityRecord>, ResolverError> {
    let unique: Vec<Curie> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut out = BTreeMap::new();
    for chunk in unique.chunks(batch_size.max(1)) {
        let mut found = provider.resolve_batch(chunk).await?;
        for id in chunk {
            let record = found.remove(id).unwrap_or_else(|| EntityRecord::self_record(id));
            out.insert(id.clone(), record);
        }
    }
    Ok(out)
}

pub async fn resolve(
    ids: &[Curie],
    provider: &dyn ResolverProvider,
) -> Result<BTreeMap<Curie, EntityRecord>, ResolverError> {
    resolve_batched(ids, provider, DEFAULT_RESOLVER_BATCH).await
}

/// Knows nothing; every id resolves to its self-record.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoResolver;

#[async_trait]
impl ResolverProvider for NoResolver {
    async fn resolve_batch(&self, _ids: &[Curie]) -> Result<HashMap<Curie, EntityRecord>, ResolverError> {
        Ok(HashMap::new())
    }
}

/// Equivalence table read from TSV:
/// `group_id<TAB>curie<TAB>label<TAB>semantic_types(comma-separated)`.
#[derive(Debug, Clone, Default)]
pub struct FixtureResolver {
    by_id: HashMap<Curie, Arc<EntityRecord>>,
}

impl FixtureResolver {
    pub fn load(path: &Path, priority: &[String]) -> Result<Self, ResolverError> {
        let text = std::fs::read_to_string(path).map_err(|source| ResolverError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_tsv(&text, priority)
    }

    pub fn from_tsv(text: &str, priority: &[String]) -> Result<Self, ResolverError> {
        struct Row {
            curie: Curie,
            label: String,
            types: Vec<String>,
        }
        let mut groups: BTreeMap<String, Vec<Row>> = BTreeMap::new();
        let mut owner: HashMap<Curie, String> = HashMap::new();

        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') || trimmed.starts_with("group_id\t") {
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if !(3..=4).contains(&cols.len()) {
                return Err(ResolverError::Fixture {
                    line: line_no,
                    reason: format!("expected 3 or 4 tab-separated columns, found {}", cols.len()),
                });
            }
            let curie = Curie::parse(cols[1].trim()).map_err(|e| ResolverError::Fixture {
                line: line_no,
                reason: e.to_string(),
            })?;
            let group = cols[0].trim().to_string();
            if let Some(prev) = owner.insert(curie.clone(), group.clone()) {
                if prev != group {
                    return Err(ResolverError::Fixture {
                        line: line_no,
                        reason: format!("{curie} appears in groups {prev:?} and {group:?}"),
                    });
                }
                continue;
            }
            let types = cols
                .get(3)
                .map(|t| {
                    t.split(',')
                        .map(|s| s.trim().trim_start_matches("biolink:").to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                })
                .unwrap_or_default();
            groups.entry(group).or_default().push(Row {
                curie,
                label: cols[2].trim().to_string(),
                types,
            });
        }

        let mut by_id = HashMap::new();
        for rows in groups.into_values() {
            let ids: Vec<Curie> = rows.iter().map(|r| r.curie.clone()).collect();
            let canonical = select_canonical(&ids, priority).expect("groups are non-empty").clone();
            let label = rows
                .iter()
                .find(|r| r.curie == canonical && !r.label.is_empty())
                .or_else(|| rows.iter().find(|r| !r.label.is_empty()))
                .map(|r| r.label.clone())
                .unwrap_or_else(|| canonical.to_string());
            let mut semantic_types = Vec::new();
            for r in &rows {
                for t in &r.types {
                    if !semantic_types.contains(t) {
                        semantic_types.push(t.clone());
                    }
                }
            }
            let record = Arc::new(EntityRecord {
                canonical_id: canonical,
                equivalent_ids: ids.clone(),
                label,
                semantic_types,
            });
            for id in ids {
                by_id.insert(id, Arc::clone(&record));
            }
        }
        Ok(Self { by_id })
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

#[async_trait]
impl ResolverProvider for FixtureResolver {
    async fn resolve_batch(&self, ids: &[Curie]) -> Result<HashMap<Curie, EntityRecord>, ResolverError> {
        Ok(ids
            .iter()
            .filter_map(|id| self.by_id.get(id).map(|r| (id.clone(), (**r).clone())))
            .collect())
    }
}

/// Read-through cache in front of another provider. Each key is filled at most
/// once; concurrent misses for the same key may both reach the inner provider
/// but the first stored record wins.
pub struct CachedResolver<P> {
    inner: P,
    cache: Mutex<HashMap<Curie, EntityRecord>>,
}

impl<P: ResolverProvider> CachedResolver<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

#[async_trait]
impl<P: ResolverProvider> ResolverProvider for CachedResolver<P> {
    async fn resolve_batch(&self, ids: &[Curie]) -> Result<HashMap<Curie, EntityRecord>, ResolverError> {
        let mut out = HashMap::new();
        let mut missing = Vec::new();
        {
            let cache = self.cache.lock().expect("resolver cache poisoned");
            for id in ids {
                match cache.get(id) {
                    Some(r) => {
                        out.insert(id.clone(), r.clone());
                    }
                    None => missing.push(id.clone()),
                }
            }
        }
        if missing.is_empty() {
            return Ok(out);
        }
        let mut fetched = self.inner.resolve_batch(&missing).await?;
        let mut cache = self.cache.lock().expect("resolver cache poisoned");
        for id in missing {
            let record = fetched.remove(&id).unwrap_or_else(|| EntityRecord::self_record(&id));
            let stored = cache.entry(id.clone()).or_insert(record).clone();
            out.insert(id, stored);
        }
        Ok(out)
    }
}

/// Client for a node-normalizer-style service.
///
/// Request: `POST <url>` with body `{"curies": ["NS:1", ...]}`.
/// Response: an object keyed by the requested CURIEs; each value is `null`
/// (unknown) or
/// `{"id": {"identifier": "NS:1", "label": "..."},
///   "equivalent_identifiers": [{"identifier": "..."}, ...],
///   "type": ["biolink:Gene", ...]}`.
pub struct HttpResolver {
    url: String,
    transport: Arc<dyn Transport>,
}

impl HttpResolver {
    pub fn new(url: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Self {
            url: url.into(),
            transport,
        }
    }

    fn parse_entry(requested: &Curie, v: &Value) -> Option<EntityRecord> {
        let canonical = v
            .pointer("/id/identifier")
            .and_then(Value::as_str)
            .and_then(|s| Curie::parse(s).ok())
            .unwrap_or_else(|| requested.clone());
        let mut equivalent_ids: Vec<Curie> = vec![canonical.clone()];
        for e in v.get("equivalent_identifiers").and_then(Value::as_array).into_iter().flatten() {
            if let Some(c) = e.get("identifier").and_then(Value::as_str).and_then(|s| Curie::parse(s).ok()) {
                if !equivalent_ids.contains(&c) {
                    equivalent_ids.push(c);
                }
            }
        }
        if !equivalent_ids.contains(requested) {
            equivalent_ids.push(requested.clone());
        }
        let label = v
            .pointer("/id/label")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| canonical.to_string());
        let semantic_types = v
            .get("type")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(Value::as_str)
            .map(|t| t.trim_start_matches("biolink:").to_string())
            .collect();
        Some(EntityRecord {
            canonical_id: canonical,
            equivalent_ids,
            label,
            semantic_types,
        })
    }
}

#[async_trait]
impl ResolverProvider for HttpResolver {
    async fn resolve_batch(&self, ids: &[Curie]) -> Result<HashMap<Curie, EntityRecord>, ResolverError> {
        let request = HttpRequestSpec {
            method: Method::Post,
            url: self.url.clone(),
            query: Vec::new(),
            headers: vec![("content-type".into(), "application/json".into())],
            body: Some(json!({ "curies": ids })),
        };
        let response = self
            .transport
            .send(&request)
            .await
            .map_err(|e| ResolverError::Unavailable(e.to_string()))?;
        if !(200..300).contains(&response.status) {
            return Err(ResolverError::Unavailable(format!("status {}", response.status)));
        }
        let body: Value = serde_json::from_str(&response.body)
            .map_err(|e| ResolverError::Unavailable(format!("malformed response: {e}")))?;
        let mut out = HashMap::new();
        for id in ids {
            if let Some(entry) = body.get(id.as_str()).filter(|v| !v.is_null()) {
                if let Some(record) = Self::parse_entry(id, entry) {
                    out.insert(id.clone(), record);
                }
            }
        }
        Ok(out)
    }
}
