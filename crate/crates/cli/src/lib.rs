//! Front ends for the fedkg engine: one-shot CLI commands and an HTTP service.

pub mod server;
pub mod settings;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use fedkg_core::engine::{render_document, EngineError};
use fedkg_core::config::HIERARCHY_FILE;
use fedkg_core::metakg::{build_metakg, export_metakg, TypeHierarchy};
use fedkg_core::registry::{Registry, RegistryError};
use serde_json::{json, Value};

use settings::{Cli, Command, QueryArgs, RegistryArgs, ServeArgs, SettingsError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INVALID_INPUT: u8 = 2;
pub const EXIT_UNSATISFIABLE: u8 = 3;

/// A failed command: its exit code and the JSON error document for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub document: Value,
}

impl Failure {
    fn new(code: u8, kind: &str, message: impl ToString) -> Self {
        Self {
            code,
            document: json!({"error": {"kind": kind, "message": message.to_string()}}),
        }
    }

    fn invalid(message: impl ToString) -> Self {
        Self::new(EXIT_INVALID_INPUT, "invalid_input", message)
    }

    fn internal(message: impl ToString) -> Self {
        Self::new(EXIT_INTERNAL, "internal", message)
    }

    fn with_details(mut self, details: Value) -> Self {
        self.document["error"]["details"] = details;
        self
    }
}

impl From<SettingsError> for Failure {
    fn from(e: SettingsError) -> Self {
        Failure::invalid(e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Query(q) => Failure::invalid(q),
            EngineError::Unsatisfiable(edges) => {
                Failure::new(EXIT_UNSATISFIABLE, "unsatisfiable", EngineError::Unsatisfiable(edges.clone()))
                    .with_details(json!({"edges": edges}))
            }
            other => Failure::internal(other),
        }
    }
}

/// Run a parsed command line; errors go to stderr as a JSON document.
pub fn run(cli: Cli) -> ExitCode {
    let outcome = match cli.command {
        Command::Query(args) => query(&args),
        Command::Serve(args) => serve(&args),
        Command::ValidateRegistry(args) => validate_registry(&args),
        Command::ExportMetakg(args) => export(&args),
    };
    match outcome {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            let _ = std::io::stderr().write_all(render_document(&f.document).as_bytes());
            ExitCode::from(f.code)
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::internal)
}

fn read_input(path: Option<&Path>) -> Result<Value, Failure> {
    let text = match path {
        None => read_stdin()?,
        Some(p) if p == Path::new("-") => read_stdin()?,
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", p.display())))?,
    };
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("query is not valid JSON: {e}")))
}

fn read_stdin() -> Result<String, Failure> {
    let mut s = String::new();
    std::io::stdin()
        .read_to_string(&mut s)
        .map_err(|e| Failure::invalid(format!("cannot read standard input: {e}")))?;
    Ok(s)
}

fn write_output(path: Option<&PathBuf>, doc: &Value) -> Result<(), Failure> {
    let text = render_document(doc);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::internal(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::internal(format!("cannot write output: {e}"))),
    }
}

fn query(args: &QueryArgs) -> Result<(), Failure> {
    let (config, _) = args.engine.resolve()?;
    let doc = read_input(args.input.as_deref())?;
    let engine = config.build().map_err(Failure::invalid)?;
    if args.explain {
        let plan = engine.explain(&doc)?;
        return write_output(args.output.as_ref(), &serde_json::to_value(plan).map_err(Failure::internal)?);
    }
    let results = runtime()?.block_on(async {
        if args.strict {
            engine.query_document_strict(&doc).await
        } else {
            engine.query_document(&doc).await
        }
    })?;
    write_output(args.output.as_ref(), &results)
}

fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let (config, settings) = args.resolve()?;
    let engine = Arc::new(config.build().map_err(Failure::invalid)?);
    runtime()?.block_on(async {
        let listener = tokio::net::TcpListener::bind(&settings.bind)
            .await
            .map_err(|e| Failure::internal(format!("cannot listen on {}: {e}", settings.bind)))?;
        tracing::info!(addr = %listener.local_addr().map_err(Failure::internal)?, "serving");
        let app = server::router(engine, settings.max_inflight_queries);
        server::serve_until(listener, app, server::shutdown_signal(), settings.drain_timeout)
            .await
            .map_err(Failure::internal)
    })
}

fn load_registry(dir: &Path) -> Result<Registry, Failure> {
    Registry::load_dir(dir).map_err(|e| match e {
        RegistryError::DocumentInvalid(docs) => Failure::invalid(format!("{} invalid document(s)", docs.len()))
            .with_details(json!({"documents": docs})),
        other => Failure::invalid(other),
    })
}

fn validate_registry(args: &RegistryArgs) -> Result<(), Failure> {
    let (dir, _) = args.resolve()?;
    let registry = load_registry(&dir)?;
    write_output(
        None,
        &json!({
            "valid": true,
            "apis": registry.api_count(),
            "operations": registry.operation_count(),
        }),
    )
}

fn export(args: &RegistryArgs) -> Result<(), Failure> {
    let (dir, hierarchy_file) = args.resolve()?;
    let registry = load_registry(&dir)?;
    let hierarchy = match hierarchy_file {
        Some(p) => TypeHierarchy::load(&p).map_err(Failure::invalid)?,
        None if dir.join(HIERARCHY_FILE).exists() => {
            TypeHierarchy::load(&dir.join(HIERARCHY_FILE)).map_err(Failure::invalid)?
        }
        None => TypeHierarchy::empty(),
    };
    write_output(None, &export_metakg(&build_metakg(&registry, &hierarchy)))
}
