//! Dot-separated field paths into JSON response documents.
//!
//! A path segment applied to an object selects a key; applied to a list it maps
//! over the elements and flattens one level. There is no indexing, wildcard or
//! predicate syntax.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid field path {path:?}: {reason}")]
pub struct InvalidPath {
    pub path: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldPath(Vec<String>);

fn valid_segment(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '@' | '$'))
}

impl FieldPath {
    pub fn parse(raw: &str) -> Result<Self, InvalidPath> {
        let err = |reason| InvalidPath {
            path: raw.to_string(),
            reason,
        };
        if raw.trim().is_empty() {
            return Err(err("empty path"));
        }
        let segments: Vec<String> = raw.split('.').map(str::to_string).collect();
        if !segments.iter().all(|s| valid_segment(s)) {
            return Err(err("segments must be non-empty identifiers separated by '.'"));
        }
        Ok(Self(segments))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    /// All values reached by the path.
    pub fn evaluate<'a>(&self, doc: &'a Value) -> Vec<&'a Value> {
        let mut current = vec![doc];
        for seg in &self.0 {
            let mut next = Vec::new();
            for v in current {
                match v {
                    Value::Object(map) => next.extend(map.get(seg)),
                    Value::Array(items) => next.extend(
                        items
                            .iter()
                            .filter_map(|item| item.as_object().and_then(|m| m.get(seg))),
                    ),
                    _ => {}
                }
            }
            current = next;
        }
        current
    }

    /// Scalar leaves reached by the path rendered as strings. A list at the end
    /// of the path contributes its scalar elements.
    pub fn scalars(&self, doc: &Value) -> Vec<String> {
        let mut out = Vec::new();
        for v in self.evaluate(doc) {
            match v {
                Value::Array(items) => out.extend(items.iter().filter_map(scalar_string)),
                other => out.extend(scalar_string(other)),
            }
        }
        out
    }
}

/// Strings as-is, numbers in plain decimal form; everything else is skipped.
pub fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(if let Some(i) = n.as_i64() {
            i.to_string()
        } else if let Some(u) = n.as_u64() {
            u.to_string()
        } else {
            // f64 Display never uses exponent notation
            format!("{}", n.as_f64()?)
        }),
        _ => None,
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

impl Serialize for FieldPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FieldPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        FieldPath::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn litvar_gene_id() {
        let doc = json!({"rsid": "rs121913527", "gene": {"id": 3845, "name": "KRAS"}});
        let p = FieldPath::parse("gene.id").unwrap();
        assert_eq!(p.scalars(&doc), vec!["3845"]);
    }

    #[test]
    fn missing_key_is_empty() {
        let doc = json!({"rsid": "rs1"});
        assert!(FieldPath::parse("gene.id").unwrap().scalars(&doc).is_empty());
    }

    #[test]
    fn maps_over_lists_and_flattens_one_level() {
        let doc = json!({"hits": [{"id": "a"}, {"id": "b"}, {"id": "c"}, 7]});
        assert_eq!(
            FieldPath::parse("hits.id").unwrap().scalars(&doc),
            vec!["a", "b", "c"]
        );
        let nested = json!({"x": [[{"id": 1}]]});
        // only one level of flattening
        assert!(FieldPath::parse("x.id").unwrap().scalars(&nested).is_empty());
        let links = json!({"links": [{"url": "u1"}]});
        assert_eq!(FieldPath::parse("links.url").unwrap().scalars(&links), vec!["u1"]);
        let top = json!([{"id": 1}, {"id": 2}]);
        assert_eq!(FieldPath::parse("id").unwrap().scalars(&top), vec!["1", "2"]);
    }

    #[test]
    fn terminal_list_of_scalars() {
        let doc = json!({"ids": [1, "x", null, {"a": 1}]});
        assert_eq!(FieldPath::parse("ids").unwrap().scalars(&doc), vec!["1", "x"]);
    }

    #[test]
    fn numbers_without_exponent() {
        assert_eq!(scalar_string(&json!(3845)).unwrap(), "3845");
        assert_eq!(scalar_string(&json!(1e21)).unwrap(), "1000000000000000000000");
        assert_eq!(scalar_string(&json!(-2)).unwrap(), "-2");
        assert_eq!(scalar_string(&json!(u64::MAX)).unwrap(), u64::MAX.to_string());
    }

    #[test]
    fn rejects_bad_paths() {
        for bad in ["", "a..b", ".a", "a.", "a b", "a[0]", "a.*"] {
            assert!(FieldPath::parse(bad).is_err(), "{bad}");
        }
    }
}
