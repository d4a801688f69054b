//! The meta-knowledge graph: semantic types as nodes, annotated operations as
//! typed edges between them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::registry::{read_text, Registry, RegistryError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("type hierarchy has a cycle through {0:?}")]
    Cycle(String),
    #[error("type hierarchy entry {0:?} has an empty name")]
    EmptyName(String),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetaKgError {
    #[error("unknown semantic type {0:?}")]
    UnknownType(String),
}

/// Child -> parent forest over semantic types. An empty hierarchy means types
/// only match themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeHierarchy {
    parent_of: BTreeMap<String, String>,
    children: BTreeMap<String, BTreeSet<String>>,
}

impl TypeHierarchy {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<I, C, P>(pairs: I) -> Result<Self, HierarchyError>
    where
        I: IntoIterator<Item = (C, P)>,
        C: Into<String>,
        P: Into<String>,
    {
        let parent_of: BTreeMap<String, String> = pairs
            .into_iter()
            .map(|(c, p)| (c.into(), p.into()))
            .collect();
        for (child, parent) in &parent_of {
            if child.is_empty() || parent.is_empty() {
                return Err(HierarchyError::EmptyName(format!("{child} -> {parent}")));
            }
        }
        for start in parent_of.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start;
            while let Some(p) = parent_of.get(cur) {
                if !seen.insert(cur) {
                    return Err(HierarchyError::Cycle(start.clone()));
                }
                cur = p;
            }
        }
        let mut children: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (c, p) in &parent_of {
            children.entry(p.clone()).or_default().insert(c.clone());
        }
        Ok(Self {
            parent_of,
            children,
        })
    }

    /// `hierarchy.yaml`: a mapping of child type to parent type.
    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = read_text(path)?;
        let format = |reason: String| RegistryError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let pairs: BTreeMap<String, String> =
            serde_yaml::from_str(&text).map_err(|e| format(e.to_string()))?;
        Self::new(pairs).map_err(|e| format(e.to_string()))
    }

    pub fn parent(&self, t: &str) -> Option<&str> {
        self.parent_of.get(t).map(String::as_str)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parent_of.iter().map(|(c, p)| (c.as_str(), p.as_str()))
    }

    /// Every type named in the hierarchy.
    pub fn types(&self) -> BTreeSet<&str> {
        self.parent_of
            .iter()
            .flat_map(|(c, p)| [c.as_str(), p.as_str()])
            .collect()
    }

    /// `t` and all of its descendants.
    pub fn descendants(&self, t: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![t.to_string()];
        while let Some(cur) = stack.pop() {
            if let Some(kids) = self.children.get(&cur) {
                stack.extend(kids.iter().cloned());
            }
            out.insert(cur);
        }
        out
    }

    pub fn is_self_or_descendant(&self, t: &str, ancestor: &str) -> bool {
        let mut cur = t;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.parent_of.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// Either type is the other's ancestor (or they are equal).
    pub fn compatible(&self, a: &str, b: &str) -> bool {
        self.is_self_or_descendant(a, b) || self.is_self_or_descendant(b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MetaEdge {
    pub subject_type: String,
    pub predicate: String,
    pub object_type: String,
    pub api_id: String,
    pub op_id: String,
    /// Namespace the operation accepts for the subject side.
    pub subject_namespace: String,
    /// Namespace the operation returns for the object side.
    pub object_namespace: String,
}

impl MetaEdge {
    fn sort_key(&self) -> (&str, &str, &str, &str, &str, &str) {
        (
            &self.api_id,
            &self.op_id,
            &self.subject_type,
            &self.object_type,
            &self.subject_namespace,
            &self.object_namespace,
        )
    }
}

#[derive(Debug, Clone)]
pub struct MetaKG {
    nodes: BTreeSet<String>,
    edges: Vec<MetaEdge>,
    index: BTreeMap<(String, String), Vec<usize>>,
    known_types: BTreeSet<String>,
}

/// One edge per (input binding x output binding) of every operation.
pub fn build_metakg(registry: &Registry, hierarchy: &TypeHierarchy) -> MetaKG {
    let mut edges = Vec::new();
    for doc in registry.documents() {
        for op in &doc.operations {
            for input in &op.inputs {
                for output in &op.outputs {
                    edges.push(MetaEdge {
                        subject_type: input.semantic_type.clone(),
                        predicate: op.predicate.clone(),
                        object_type: output.semantic_type.clone(),
                        api_id: doc.api_id.clone(),
                        op_id: op.op_id.clone(),
                        subject_namespace: input.id_namespace.clone(),
                        object_namespace: output.id_namespace.clone(),
                    });
                }
            }
        }
    }
    edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut nodes = BTreeSet::new();
    let mut index: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        nodes.insert(e.subject_type.clone());
        nodes.insert(e.object_type.clone());
        index
            .entry((e.subject_type.clone(), e.object_type.clone()))
            .or_default()
            .push(i);
    }

    let mut known_types: BTreeSet<String> = registry.vocabulary().semantic_types.clone();
    known_types.extend(hierarchy.types().into_iter().map(str::to_string));
    known_types.extend(nodes.iter().cloned());

    MetaKG {
        nodes,
        edges,
        index,
        known_types,
    }
}

impl MetaKG {
    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &[MetaEdge] {
        &self.edges
    }

    pub fn is_known_type(&self, t: &str) -> bool {
        self.known_types.contains(t)
    }

    fn expand(
        &self,
        types: Option<&BTreeSet<String>>,
        hierarchy: &TypeHierarchy,
    ) -> Result<Option<BTreeSet<String>>, MetaKgError> {
        let Some(types) = types else { return Ok(None) };
        let mut out = BTreeSet::new();
        for t in types {
            if !self.is_known_type(t) {
                return Err(MetaKgError::UnknownType(t.clone()));
            }
            out.extend(hierarchy.descendants(t));
        }
        Ok(Some(out))
    }

    /// Edges matching every present constraint. A constrained type also matches
    /// its descendants; predicates match exactly. Result is in edge order.
    pub fn lookup(
        &self,
        subject_types: Option<&BTreeSet<String>>,
        predicates: Option<&BTreeSet<String>>,
        object_types: Option<&BTreeSet<String>>,
        hierarchy: &TypeHierarchy,
    ) -> Result<Vec<&MetaEdge>, MetaKgError> {
        let subjects = self.expand(subject_types, hierarchy)?;
        let objects = self.expand(object_types, hierarchy)?;
        let pred_ok = |e: &MetaEdge| predicates.is_none_or(|p| p.contains(&e.predicate));

        let hits: Vec<&MetaEdge> = match (&subjects, &objects) {
            (Some(s), Some(o)) => {
                let mut idx: Vec<usize> = Vec::new();
                for st in s {
                    for ot in o {
                        if let Some(list) = self.index.get(&(st.clone(), ot.clone())) {
                            idx.extend(list);
                        }
                    }
                }
                idx.sort_unstable();
                idx.into_iter()
                    .map(|i| &self.edges[i])
                    .filter(|e| pred_ok(e))
                    .collect()
            }
            _ => self
                .edges
                .iter()
                .filter(|e| subjects.as_ref().is_none_or(|s| s.contains(&e.subject_type)))
                .filter(|e| objects.as_ref().is_none_or(|o| o.contains(&e.object_type)))
                .filter(|e| pred_ok(e))
                .collect(),
        };
        Ok(hits)
    }

    /// Nodes (type -> id namespaces seen) and deduplicated
    /// subject/predicate/object triples with the operations providing each.
    pub fn export(&self) -> Value {
        let mut prefixes: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        // (subject, predicate, object) -> (api, op) providers
        type Triples<'m> = BTreeMap<(&'m str, &'m str, &'m str), BTreeSet<(&'m str, &'m str)>>;
        let mut triples: Triples = BTreeMap::new();
        for e in &self.edges {
            prefixes.entry(&e.subject_type).or_default().insert(&e.subject_namespace);
            prefixes.entry(&e.object_type).or_default().insert(&e.object_namespace);
            triples
                .entry((&e.subject_type, &e.predicate, &e.object_type))
                .or_default()
                .insert((&e.api_id, &e.op_id));
        }
        let nodes: serde_json::Map<String, Value> = prefixes
            .into_iter()
            .map(|(t, ns)| (t.to_string(), json!({ "id_prefixes": ns })))
            .collect();
        let edges: Vec<Value> = triples
            .into_iter()
            .map(|((s, p, o), provenance)| {
                let provided_by: Vec<Value> = provenance
                    .into_iter()
                    .map(|(api, op)| json!({"api_id": api, "op_id": op}))
                    .collect();
                json!({"subject": s, "predicate": p, "object": o, "provided_by": provided_by})
            })
            .collect();
        json!({"nodes": nodes, "edges": edges})
    }
}

pub fn export_metakg(metakg: &MetaKG) -> Value {
    metakg.export()
}
