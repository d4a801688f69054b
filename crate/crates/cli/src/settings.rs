//! Command line flags and their merge with environment variables and an
//! optional TOML config file. Flags win over `FEDKG_*` variables, which win
//! over the file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use fedkg_core::config::{ConfigError, CountsConfig, EngineConfig, ResolverConfig, TransportConfig};
use fedkg_core::executor::ExecutionPolicy;
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "fedkg", version, about = "Answer graph queries by federating annotated web APIs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one query and print its results document.
    Query(QueryArgs),
    /// Serve queries over HTTP.
    Serve(ServeArgs),
    /// Check every annotation document in the registry.
    ValidateRegistry(RegistryArgs),
    /// Print the meta knowledge graph the registry induces.
    ExportMetakg(RegistryArgs),
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Query document; standard input when absent or `-`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Where to write the output; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Print the query plan instead of executing it.
    #[arg(long)]
    pub explain: bool,
    /// Fail with exit code 3 when some query edge has no serving operation.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Listen address.
    #[arg(long, env = "FEDKG_BIND")]
    pub bind: Option<String>,
    /// Queries executed at once; further requests wait.
    #[arg(long, env = "FEDKG_MAX_INFLIGHT_QUERIES")]
    pub max_inflight_queries: Option<usize>,
    /// How long shutdown waits for in-flight queries.
    #[arg(long, env = "FEDKG_DRAIN_TIMEOUT_MS")]
    pub drain_timeout_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RegistryArgs {
    #[arg(long, env = "FEDKG_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory of annotation documents.
    #[arg(long, env = "FEDKG_REGISTRY")]
    pub registry: Option<PathBuf>,
    /// Category hierarchy file; defaults to `hierarchy.yaml` in the registry.
    #[arg(long, env = "FEDKG_HIERARCHY")]
    pub hierarchy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// TOML file with defaults for any of these settings.
    #[arg(long, env = "FEDKG_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory of annotation documents.
    #[arg(long, env = "FEDKG_REGISTRY")]
    pub registry: Option<PathBuf>,
    /// Category hierarchy file; defaults to `hierarchy.yaml` in the registry.
    #[arg(long, env = "FEDKG_HIERARCHY")]
    pub hierarchy: Option<PathBuf>,
    /// `fixture:<tsv>`, `http:<url>` or `none`.
    #[arg(long, env = "FEDKG_RESOLVER")]
    pub resolver: Option<ResolverConfig>,
    /// `fixture:<tsv>` or `none`.
    #[arg(long, env = "FEDKG_COUNTS")]
    pub counts: Option<CountsConfig>,
    /// `simnet:<scenario>` or `live`.
    #[arg(long, env = "FEDKG_TRANSPORT")]
    pub transport: Option<TransportConfig>,
    #[arg(long, env = "FEDKG_MAX_CONCURRENCY")]
    pub max_concurrency: Option<usize>,
    #[arg(long, env = "FEDKG_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,
    #[arg(long, env = "FEDKG_MAX_RETRIES")]
    pub max_retries: Option<u32>,
    #[arg(long, env = "FEDKG_RETRY_BACKOFF_MS")]
    pub retry_backoff_ms: Option<u64>,
    /// Permit real network calls with `--transport live`.
    #[arg(long, env = "FEDKG_ALLOW_LIVE")]
    pub allow_live: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("missing setting `{0}`: pass --{0}, set FEDKG_{1} or add `{2}` to the config file")]
    Missing(&'static str, &'static str, &'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Contents of a config file. Every key is optional; relative paths are
/// taken relative to the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub registry: Option<PathBuf>,
    pub hierarchy: Option<PathBuf>,
    pub resolver: Option<ResolverConfig>,
    pub counts: Option<CountsConfig>,
    pub transport: Option<TransportConfig>,
    pub max_concurrency: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub retry_backoff_ms: Option<u64>,
    pub allow_live: Option<bool>,
    pub bind: Option<String>,
    pub max_inflight_queries: Option<usize>,
    pub drain_timeout_ms: Option<u64>,
}

impl FileSettings {
    pub fn load(path: Option<&Path>) -> Result<Self, SettingsError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut s: Self = toml::from_str(&text).map_err(|source| SettingsError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        s.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(s)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.registry.iter_mut().for_each(join);
        self.hierarchy.iter_mut().for_each(join);
        if let Some(ResolverConfig::Fixture(p)) = &mut self.resolver {
            join(p);
        }
        if let Some(CountsConfig::Fixture(p)) = &mut self.counts {
            join(p);
        }
        if let Some(TransportConfig::Simnet(p)) = &mut self.transport {
            join(p);
        }
    }
}

impl EngineArgs {
    /// Merge flags, environment and config file into an engine config.
    pub fn resolve(&self) -> Result<(EngineConfig, FileSettings), SettingsError> {
        let file = FileSettings::load(self.config.as_deref())?;
        let registry = self
            .registry
            .clone()
            .or(file.registry.clone())
            .ok_or(SettingsError::Missing("registry", "REGISTRY", "registry"))?;
        let transport = self
            .transport
            .clone()
            .or(file.transport.clone())
            .ok_or(SettingsError::Missing("transport", "TRANSPORT", "transport"))?;
        let defaults = ExecutionPolicy::default();
        let policy = ExecutionPolicy {
            max_concurrency: self.max_concurrency.or(file.max_concurrency).unwrap_or(defaults.max_concurrency),
            timeout_ms: self.timeout_ms.or(file.timeout_ms).unwrap_or(defaults.timeout_ms),
            max_retries: self.max_retries.or(file.max_retries).unwrap_or(defaults.max_retries),
            retry_backoff_ms: self
                .retry_backoff_ms
                .or(file.retry_backoff_ms)
                .unwrap_or(defaults.retry_backoff_ms),
        };
        let mut config = EngineConfig::new(registry, transport);
        config.hierarchy_file = self.hierarchy.clone().or(file.hierarchy.clone());
        config.resolver = self.resolver.clone().or(file.resolver.clone()).unwrap_or(ResolverConfig::None);
        config.counts = self.counts.clone().or(file.counts.clone()).unwrap_or(CountsConfig::None);
        config.policy = policy;
        config.allow_live = self.allow_live || file.allow_live.unwrap_or(false);
        config.validate()?;
        Ok((config, file))
    }
}

impl RegistryArgs {
    /// Registry directory and hierarchy file.
    pub fn resolve(&self) -> Result<(PathBuf, Option<PathBuf>), SettingsError> {
        let file = FileSettings::load(self.config.as_deref())?;
        let registry = self
            .registry
            .clone()
            .or(file.registry)
            .ok_or(SettingsError::Missing("registry", "REGISTRY", "registry"))?;
        Ok((registry, self.hierarchy.clone().or(file.hierarchy)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeSettings {
    pub bind: String,
    pub max_inflight_queries: usize,
    pub drain_timeout: Duration,
}

impl ServeArgs {
    pub fn resolve(&self) -> Result<(EngineConfig, ServeSettings), SettingsError> {
        let (engine, file) = self.engine.resolve()?;
        let serve = ServeSettings {
            bind: self.bind.clone().or(file.bind).unwrap_or_else(|| "127.0.0.1:8080".into()),
            max_inflight_queries: self.max_inflight_queries.or(file.max_inflight_queries).unwrap_or(16).max(1),
            drain_timeout: Duration::from_millis(self.drain_timeout_ms.or(file.drain_timeout_ms).unwrap_or(10_000)),
        };
        Ok((engine, serve))
    }
}
