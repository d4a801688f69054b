//! Python bindings. Documents cross the boundary as JSON text.

use std::path::PathBuf;

use fedkg_core::config::{ConfigError, EngineConfig};
use fedkg_core::engine::{render_document, Engine as CoreEngine, EngineError};
use fedkg_core::executor::ExecutionPolicy;
use fedkg_core::metakg::export_metakg;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::Value;

fn config_err(e: ConfigError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn engine_err(e: EngineError) -> PyErr {
    match e {
        EngineError::Query(_) | EngineError::Unsatisfiable(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse(text: &str) -> PyResult<Value> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("query is not valid JSON: {e}")))
}

/// A query engine over a registry directory and a transport.
#[pyclass(frozen)]
pub struct Engine {
    inner: CoreEngine,
    runtime: tokio::runtime::Runtime,
}

#[pymethods]
impl Engine {
    /// `transport` is `simnet:<scenario>` (or `live` when built with it);
    /// `resolver` and `counts` take `fixture:<tsv>` or `none`.
    #[new]
    #[pyo3(signature = (registry, transport, resolver = "none", counts = "none", hierarchy = None, max_concurrency = 8, timeout_ms = 10_000, max_retries = 2))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        registry: PathBuf,
        transport: &str,
        resolver: &str,
        counts: &str,
        hierarchy: Option<PathBuf>,
        max_concurrency: usize,
        timeout_ms: u64,
        max_retries: u32,
    ) -> PyResult<Self> {
        let mut cfg = EngineConfig::new(registry, transport.parse().map_err(config_err)?);
        cfg.resolver = resolver.parse().map_err(config_err)?;
        cfg.counts = counts.parse().map_err(config_err)?;
        cfg.hierarchy_file = hierarchy;
        cfg.policy = ExecutionPolicy {
            max_concurrency,
            timeout_ms,
            max_retries,
            ..ExecutionPolicy::default()
        };
        let inner = cfg.build().map_err(config_err)?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(Self { inner, runtime })
    }

    /// Run a query document and return the results document.
    #[pyo3(signature = (query, strict = false))]
    fn query(&self, py: Python<'_>, query: &str, strict: bool) -> PyResult<String> {
        let doc = parse(query)?;
        let results = py.detach(|| {
            self.runtime.block_on(async {
                if strict {
                    self.inner.query_document_strict(&doc).await
                } else {
                    self.inner.query_document(&doc).await
                }
            })
        });
        Ok(render_document(&results.map_err(engine_err)?))
    }

    /// The plan for a query document, without calling any API.
    fn explain(&self, query: &str) -> PyResult<String> {
        let plan = self.inner.explain(&parse(query)?).map_err(engine_err)?;
        let value = serde_json::to_value(plan).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(render_document(&value))
    }

    fn meta_knowledge_graph(&self) -> String {
        render_document(&export_metakg(self.inner.metakg()))
    }
}

#[pymodule]
fn fedkg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Engine>()?;
    Ok(())
}
