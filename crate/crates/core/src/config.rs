//! Engine configuration and wiring of providers from it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::executor::{ExecutionPolicy, PolicyError, Transport};
use crate::metakg::TypeHierarchy;
use crate::registry::{Registry, RegistryError};
use crate::resolve::{default_priority, CachedResolver, FixtureResolver, HttpResolver, NoResolver, ResolverError, ResolverProvider};
use crate::score::{CountsError, CountsProvider, FileFixtureCounts, NoCounts};
use crate::simnet::{ScenarioError, SimNet};

pub const HIERARCHY_FILE: &str = "hierarchy.yaml";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid setting {0:?}: expected {1}")]
    Syntax(String, &'static str),
    #[error("{what} {path} does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("live transport needs the `live` build feature and an explicit opt-in")]
    LiveNotAllowed,
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Resolver(#[from] ResolverError),
    #[error(transparent)]
    Counts(#[from] CountsError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ResolverConfig {
    Fixture(PathBuf),
    Http(String),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CountsConfig {
    Fixture(PathBuf),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TransportConfig {
    Simnet(PathBuf),
    Live,
}

impl FromStr for ResolverConfig {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "none" => Ok(Self::None),
            Some(("fixture", p)) if !p.is_empty() => Ok(Self::Fixture(p.into())),
            Some(("http", rest)) if !rest.is_empty() => Ok(Self::Http(rest.to_string())),
            _ => Err(ConfigError::Syntax(s.into(), "fixture:<path>, http:<url> or none")),
        }
    }
}

impl FromStr for CountsConfig {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "none" => Ok(Self::None),
            Some(("fixture", p)) if !p.is_empty() => Ok(Self::Fixture(p.into())),
            _ => Err(ConfigError::Syntax(s.into(), "fixture:<path> or none")),
        }
    }
}

impl FromStr for TransportConfig {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "live" => Ok(Self::Live),
            Some(("simnet", p)) if !p.is_empty() => Ok(Self::Simnet(p.into())),
            _ => Err(ConfigError::Syntax(s.into(), "simnet:<scenario> or live")),
        }
    }
}

impl fmt::Display for ResolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixture(p) => write!(f, "fixture:{}", p.display()),
            Self::Http(url) => write!(f, "http:{url}"),
            Self::None => f.write_str("none"),
        }
    }
}

impl fmt::Display for CountsConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixture(p) => write!(f, "fixture:{}", p.display()),
            Self::None => f.write_str("none"),
        }
    }
}

impl fmt::Display for TransportConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Simnet(p) => write!(f, "simnet:{}", p.display()),
            Self::Live => f.write_str("live"),
        }
    }
}

macro_rules! string_conversions {
    ($($t:ty),*) => {$(
        impl TryFrom<String> for $t {
            type Error = ConfigError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }
        impl From<$t> for String {
            fn from(v: $t) -> String {
                v.to_string()
            }
        }
    )*};
}

string_conversions!(ResolverConfig, CountsConfig, TransportConfig);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub registry_dir: PathBuf,
    #[serde(default)]
    pub hierarchy_file: Option<PathBuf>,
    pub resolver: ResolverConfig,
    pub counts: CountsConfig,
    #[serde(default)]
    pub policy: ExecutionPolicy,
    pub transport: TransportConfig,
    #[serde(default)]
    pub allow_live: bool,
}

fn require(what: &'static str, path: &Path) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError::MissingPath {
            what,
            path: path.to_path_buf(),
        })
    }
}

impl EngineConfig {
    pub fn new(registry_dir: impl Into<PathBuf>, transport: TransportConfig) -> Self {
        Self {
            registry_dir: registry_dir.into(),
            hierarchy_file: None,
            resolver: ResolverConfig::None,
            counts: CountsConfig::None,
            policy: ExecutionPolicy::default(),
            transport,
            allow_live: false,
        }
    }

    /// Fixture paths exist, the policy is sane, and live transport is opted in.
    pub fn validate(&self) -> Result<(), ConfigError> {
        require("registry directory", &self.registry_dir)?;
        if let Some(h) = &self.hierarchy_file {
            require("hierarchy file", h)?;
        }
        if let ResolverConfig::Fixture(p) = &self.resolver {
            require("resolver fixture", p)?;
        }
        if let CountsConfig::Fixture(p) = &self.counts {
            require("counts fixture", p)?;
        }
        match &self.transport {
            TransportConfig::Simnet(p) => require("simnet scenario", p)?,
            TransportConfig::Live if !(self.allow_live && cfg!(feature = "live")) => return Err(ConfigError::LiveNotAllowed),
            TransportConfig::Live => {}
        }
        self.policy.validate()?;
        Ok(())
    }

    fn hierarchy(&self) -> Result<TypeHierarchy, ConfigError> {
        let path = match &self.hierarchy_file {
            Some(p) => p.clone(),
            None => self.registry_dir.join(HIERARCHY_FILE),
        };
        if self.hierarchy_file.is_none() && !path.exists() {
            return Ok(TypeHierarchy::empty());
        }
        Ok(TypeHierarchy::load(&path)?)
    }

    pub fn build_transport(&self) -> Result<Arc<dyn Transport>, ConfigError> {
        match &self.transport {
            TransportConfig::Simnet(p) => Ok(Arc::new(SimNet::load(p)?)),
            #[cfg(feature = "live")]
            TransportConfig::Live if self.allow_live => Ok(Arc::new(crate::executor::LiveTransport::new())),
            TransportConfig::Live => Err(ConfigError::LiveNotAllowed),
        }
    }

    /// Build an engine using the configured transport.
    pub fn build(&self) -> Result<Engine, ConfigError> {
        self.validate()?;
        let transport = self.build_transport()?;
        self.build_with_transport(transport)
    }

    /// Build an engine around a caller-supplied transport, e.g. a shared simnet
    /// whose call log a test wants to inspect.
    pub fn build_with_transport(&self, transport: Arc<dyn Transport>) -> Result<Engine, ConfigError> {
        self.policy.validate()?;
        let registry = Arc::new(Registry::load_dir(&self.registry_dir)?);
        let hierarchy = self.hierarchy()?;
        let resolver: Arc<dyn ResolverProvider> = match &self.resolver {
            ResolverConfig::Fixture(p) => Arc::new(FixtureResolver::load(p, &default_priority())?),
            ResolverConfig::Http(url) => Arc::new(CachedResolver::new(HttpResolver::new(url.clone(), transport.clone()))),
            ResolverConfig::None => Arc::new(NoResolver),
        };
        let counts: Arc<dyn CountsProvider> = match &self.counts {
            CountsConfig::Fixture(p) => Arc::new(FileFixtureCounts::load(p)?),
            CountsConfig::None => Arc::new(NoCounts),
        };
        Ok(Engine::new(registry, hierarchy, resolver, counts, transport, self.policy))
    }
}
