use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, RegistryError};

/// Allowed semantic types and identifier namespaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeVocabulary {
    pub semantic_types: BTreeSet<String>,
    pub id_namespaces: BTreeSet<String>,
}

const STANDARD_TYPES: &[&str] = &[
    "NamedThing",
    "BiologicalEntity",
    "Disease",
    "PhenotypicFeature",
    "Gene",
    "Protein",
    "SequenceVariant",
    "ChemicalEntity",
    "SmallMolecule",
    "Drug",
    "Pathway",
    "BiologicalProcess",
    "AnatomicalEntity",
    "Cell",
];

const STANDARD_NAMESPACES: &[&str] = &[
    "NCBIGene",
    "ENSEMBL",
    "HGNC",
    "UniProtKB",
    "DBSNP",
    "MONDO",
    "DOID",
    "MESH",
    "OMIM",
    "HP",
    "UMLS",
    "CHEBI",
    "CHEMBL.COMPOUND",
    "PUBCHEM.COMPOUND",
    "DRUGBANK",
    "GO",
    "REACT",
    "UBERON",
    "CL",
];

impl TypeVocabulary {
    pub fn new<T, N>(types: T, namespaces: N) -> Self
    where
        T: IntoIterator,
        T::Item: Into<String>,
        N: IntoIterator,
        N::Item: Into<String>,
    {
        Self {
            semantic_types: types.into_iter().map(Into::into).collect(),
            id_namespaces: namespaces.into_iter().map(Into::into).collect(),
        }
    }

    /// A small Biolink-flavoured default.
    pub fn standard() -> Self {
        Self::new(STANDARD_TYPES.iter().copied(), STANDARD_NAMESPACES.iter().copied())
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = read_text(path)?;
        serde_yaml::from_str(&text).map_err(|e| RegistryError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn has_type(&self, t: &str) -> bool {
        self.semantic_types.contains(t)
    }

    pub fn has_namespace(&self, ns: &str) -> bool {
        self.id_namespaces.contains(ns)
    }
}
