//! Result scoring with the Normalized Google Distance over co-occurrence
//! counts of each record's endpoints.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assemble::ResultGraph;
use crate::curie::Curie;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccurrenceCounts {
    pub f_x: u64,
    pub f_y: u64,
    pub f_xy: u64,
    pub n: u64,
}

impl OccurrenceCounts {
    pub fn new(f_x: u64, f_y: u64, f_xy: u64, n: u64) -> Self {
        Self { f_x, f_y, f_xy, n }
    }

    pub fn swapped(self) -> Self {
        Self {
            f_x: self.f_y,
            f_y: self.f_x,
            ..self
        }
    }

    pub fn check(&self) -> Result<(), DomainError> {
        if self.n == 0 {
            return Err(DomainError("N must be at least 1".into()));
        }
        if self.f_x > self.n || self.f_y > self.n {
            return Err(DomainError(format!("f_x={} f_y={} exceed N={}", self.f_x, self.f_y, self.n)));
        }
        if self.f_xy > self.f_x.min(self.f_y) {
            return Err(DomainError(format!(
                "f_xy={} exceeds min(f_x, f_y)={}",
                self.f_xy,
                self.f_x.min(self.f_y)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("counts outside the NGD domain: {0}")]
pub struct DomainError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Ngd {
    Finite(f64),
    Infinite,
}

impl Ngd {
    /// 1/(1+NGD), with infinite distance scoring 0.
    pub fn similarity(self) -> f64 {
        match self {
            Ngd::Finite(d) => 1.0 / (1.0 + d),
            Ngd::Infinite => 0.0,
        }
    }
}

/// `(max(ln f_x, ln f_y) - ln f_xy) / (ln N - min(ln f_x, ln f_y))`.
pub fn ngd(c: OccurrenceCounts) -> Result<Ngd, DomainError> {
    c.check()?;
    if c.f_xy == 0 {
        return Ok(Ngd::Infinite);
    }
    let (lx, ly, lxy, ln) = (
        (c.f_x as f64).ln(),
        (c.f_y as f64).ln(),
        (c.f_xy as f64).ln(),
        (c.n as f64).ln(),
    );
    if c.f_x.min(c.f_y) == c.n {
        // both terms appear everywhere
        return Ok(if c.f_xy == c.n { Ngd::Finite(0.0) } else { Ngd::Infinite });
    }
    Ok(Ngd::Finite((lx.max(ly) - lxy) / (ln - lx.min(ly))))
}

/// Co-occurrence lookup. Must be symmetric: `counts(y, x)` is `counts(x, y)`
/// with `f_x` and `f_y` swapped.
pub trait CountsProvider: Send + Sync {
    fn counts(&self, x: &Curie, y: &Curie) -> Option<OccurrenceCounts>;
}

/// Knows no pairs; every record scores 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoCounts;

impl CountsProvider for NoCounts {
    fn counts(&self, _: &Curie, _: &Curie) -> Option<OccurrenceCounts> {
        None
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CountsError {
    #[error("counts fixture line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("cannot read counts fixture {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// TSV fixture: a `# N=<int>` header, then `x  y  f_x  f_y  f_xy` rows.
#[derive(Debug, Clone, Default)]
pub struct FileFixtureCounts {
    n: u64,
    pairs: HashMap<(Curie, Curie), OccurrenceCounts>,
}

impl FileFixtureCounts {
    pub fn load(path: &Path) -> Result<Self, CountsError> {
        let text = std::fs::read_to_string(path).map_err(|source| CountsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_tsv(&text)
    }

    pub fn from_tsv(text: &str) -> Result<Self, CountsError> {
        let mut n = None;
        let mut pairs = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| CountsError::Format { line: line_no, reason };
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("N=") {
                    n = Some(v.trim().parse::<u64>().map_err(|e| err(format!("bad N: {e}")))?);
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let n = n.ok_or_else(|| err("row before the `# N=` header".into()))?;
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if cols.len() != 5 {
                return Err(err(format!("expected 5 columns, found {}", cols.len())));
            }
            let x: Curie = cols[0].parse().map_err(|e| err(format!("{e}")))?;
            let y: Curie = cols[1].parse().map_err(|e| err(format!("{e}")))?;
            let mut nums = [0u64; 3];
            for (slot, col) in nums.iter_mut().zip(&cols[2..]) {
                *slot = col.parse().map_err(|e| err(format!("bad count {col:?}: {e}")))?;
            }
            let c = OccurrenceCounts::new(nums[0], nums[1], nums[2], n);
            c.check().map_err(|e| err(e.to_string()))?;
            if pairs.contains_key(&(y.clone(), x.clone())) || pairs.contains_key(&(x.clone(), y.clone())) {
                return Err(err(format!("pair {x} {y} listed twice")));
            }
            pairs.insert((x, y), c);
        }
        Ok(Self {
            n: n.unwrap_or(0),
            pairs,
        })
    }

    pub fn corpus_size(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl CountsProvider for FileFixtureCounts {
    fn counts(&self, x: &Curie, y: &Curie) -> Option<OccurrenceCounts> {
        if let Some(c) = self.pairs.get(&(x.clone(), y.clone())) {
            return Some(*c);
        }
        self.pairs.get(&(y.clone(), x.clone())).map(|c| c.swapped())
    }
}

/// Score of one record: similarity of its subject and object, 0 when unknown.
pub fn record_score(subject: &Curie, object: &Curie, provider: &dyn CountsProvider) -> f64 {
    provider
        .counts(subject, object)
        .and_then(|c| ngd(c).ok())
        .map_or(0.0, Ngd::similarity)
}

/// Mean over query edges of the best record score on that edge; 1 for a
/// result with no edges.
pub fn score_result(result: &ResultGraph, provider: &dyn CountsProvider) -> f64 {
    if result.edge_bindings.is_empty() {
        return 1.0;
    }
    let total: f64 = result
        .edge_bindings
        .values()
        .map(|records| {
            records
                .iter()
                .map(|r| record_score(&r.subject.canonical_id, &r.object.canonical_id, provider))
                .fold(0.0, f64::max)
        })
        .sum();
    total / result.edge_bindings.len() as f64
}

pub fn score_all(results: &mut [ResultGraph], provider: &dyn CountsProvider) {
    for r in results {
        r.score = score_result(r, provider);
    }
}

/// Descending by score; ties by node bindings.
pub fn rank(mut results: Vec<ResultGraph>) -> Vec<ResultGraph> {
    results.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.binding_key().cmp(&b.binding_key()))
    });
    results
}
