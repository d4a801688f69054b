//! Compact identifiers of the form `NAMESPACE:value`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("not a CURIE: {0:?}")]
pub struct InvalidCurie(pub String);

/// A syntactically valid CURIE. The prefix is everything before the first `:`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Curie {
    raw: String,
    split: usize,
}

impl Curie {
    pub fn parse(s: &str) -> Result<Self, InvalidCurie> {
        let split = s.find(':').ok_or_else(|| InvalidCurie(s.to_string()))?;
        let (prefix, rest) = (&s[..split], &s[split + 1..]);
        let prefix_ok = !prefix.is_empty()
            && prefix
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'));
        let rest_ok = !rest.is_empty() && !rest.chars().any(char::is_whitespace);
        if prefix_ok && rest_ok {
            Ok(Self {
                raw: s.to_string(),
                split,
            })
        } else {
            Err(InvalidCurie(s.to_string()))
        }
    }

    /// Build `namespace:value`, keeping `value` as-is if it already carries the prefix.
    pub fn from_parts(namespace: &str, value: &str) -> Result<Self, InvalidCurie> {
        let prefixed = format!("{namespace}:");
        if value.starts_with(&prefixed) {
            Self::parse(value)
        } else {
            Self::parse(&format!("{prefixed}{value}"))
        }
    }

    pub fn prefix(&self) -> &str {
        &self.raw[..self.split]
    }

    pub fn reference(&self) -> &str {
        &self.raw[self.split + 1..]
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }
}

impl fmt::Display for Curie {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for Curie {
    type Err = InvalidCurie;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Curie {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Curie {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Curie::parse(&s).map_err(serde::de::Error::custom)
    }
}
