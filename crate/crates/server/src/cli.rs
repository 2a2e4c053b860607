//! Command-line interface: `serve`, `import`, `export`, `sweep`, `mint-check`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use termreg_core::clock::SystemClock;
use termreg_core::ids::{SchemaId, UserId};
use termreg_core::ingest::{DefaultFetcher, Fetcher, Format};
use termreg_core::model::Status;
use termreg_core::registry::{BrowseFilter, ExportFormat, ExportRequest, NewUser};
use termreg_core::{Error, Registry};

use crate::api::{router, AppState};
use crate::config::ServiceConfig;
use crate::tasks;

#[derive(Debug, Parser)]
#[command(name = "termreg", version, about = "Community vocabulary registry")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store file (overrides `store.path`).
    #[arg(long, global = true)]
    pub store: Option<String>,
    /// Any configuration key, as `path=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = parse_kv)]
    pub set: Vec<(String, String)>,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service with its background tasks.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        base_url: Option<String>,
    },
    /// Import a schema or a record set from a file.
    Import {
        /// Handle of the importing user.
        #[arg(long = "as", value_name = "HANDLE")]
        user: String,
        /// Register the user if the handle is unknown.
        #[arg(long)]
        create_user: bool,
        /// rdfxml, turtle, skos, xml or json. Guessed from the extension if omitted.
        #[arg(long)]
        format: Option<String>,
        /// `schema` or `records`.
        #[arg(long, default_value = "schema")]
        kind: String,
        /// URL recorded as the source, audited later.
        #[arg(long)]
        source_url: Option<String>,
        /// Target schema for records (id or ARK).
        #[arg(long)]
        schema: Option<String>,
        /// Collection name for records.
        #[arg(long)]
        collection: Option<String>,
        file: PathBuf,
    },
    /// Export terms as json, xml, rdf or skos.
    Export {
        #[arg(long)]
        format: String,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        include_versions: bool,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Audit every source, rescore every term, and print a JSON report.
    Sweep,
    /// Validate every stored ARK and dry-run new mints.
    MintCheck {
        /// Dry-run mints per kind.
        #[arg(long, default_value_t = 3)]
        sample: u64,
    },
}

#[derive(Debug, Args, Default)]
pub struct FilterArgs {
    #[arg(long)]
    pub collection: Option<String>,
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long)]
    pub status: Option<String>,
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long)]
    pub contributor: Option<String>,
}

impl FilterArgs {
    fn filter(&self, reg: &Registry) -> Result<BrowseFilter, Error> {
        let schema = match &self.schema {
            Some(s) => Some(resolve_schema(reg, s)?),
            None => None,
        };
        let contributor = match &self.contributor {
            Some(c) => Some(match c.parse::<UserId>() {
                Ok(id) => id,
                Err(_) => reg.user_by_handle(c)?.id,
            }),
            None => None,
        };
        Ok(BrowseFilter {
            collection: self.collection.clone(),
            schema,
            subject: self.subject.clone(),
            status: self.status.as_deref().map(str::parse::<Status>).transpose()?,
            tag: self.tag.clone(),
            contributor,
        })
    }
}

/// A schema named by id (`3`, `schema:3`) or by ARK.
pub fn resolve_schema(reg: &Registry, raw: &str) -> Result<SchemaId, Error> {
    if let Ok(id) = raw.parse::<SchemaId>() {
        return Ok(id);
    }
    let ark = raw.find("ark:").map_or(raw, |i| &raw[i..]);
    reg.schemas()
        .into_iter()
        .find(|s| s.ark == ark)
        .map(|s| s.id)
        .ok_or_else(|| Error::NotFound(format!("schema `{raw}`")))
}

/// Format from a file extension.
pub fn guess_format(path: &Path) -> Option<Format> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "ttl" => Some(Format::Turtle),
        "rdf" | "owl" => Some(Format::RdfXml),
        "json" => Some(Format::JsonTerms),
        "xml" => Some(Format::GenericXml),
        _ => None,
    }
}

impl Cli {
    fn config(&self, extra: &[(String, String)]) -> Result<ServiceConfig, Error> {
        let mut overrides = Vec::new();
        if let Some(store) = &self.global.store {
            overrides.push(("store.path".to_string(), store.clone()));
        }
        overrides.extend(extra.iter().cloned());
        overrides.extend(self.global.set.iter().cloned());
        ServiceConfig::load(self.global.config.as_deref(), |k| std::env::var(k).ok(), &overrides)
    }

    /// Runs the command, writing results to `out`. Returns the exit code.
    pub fn run(self, out: &mut dyn std::io::Write) -> Result<i32, Error> {
        let io = |e: std::io::Error| Error::Storage(e.to_string());
        match &self.command {
            Command::Serve { bind, port, base_url } => {
                let mut extra = Vec::new();
                if let Some(b) = bind {
                    extra.push(("server.bind".to_string(), b.clone()));
                }
                if let Some(p) = port {
                    extra.push(("server.port".to_string(), p.to_string()));
                }
                if let Some(u) = base_url {
                    extra.push(("server.base_url".to_string(), u.clone()));
                }
                let cfg = self.config(&extra)?;
                let runtime = tokio::runtime::Runtime::new().map_err(io)?;
                runtime.block_on(serve(cfg))?;
                Ok(0)
            }
            Command::Import {
                user,
                create_user,
                format,
                kind,
                source_url,
                schema,
                collection,
                file,
            } => {
                let reg = open(&self.config(&[])?)?;
                let format = match format {
                    Some(f) => f.parse()?,
                    None => guess_format(file)
                        .ok_or_else(|| Error::Validation("cannot tell the format; pass --format".into()))?,
                };
                let doc = std::fs::read(file).map_err(|e| Error::Storage(format!("{}: {e}", file.display())))?;
                let uid = match reg.user_by_handle(user) {
                    Ok(u) => u.id,
                    Err(Error::NotFound(_)) if *create_user => {
                        let mut new = NewUser::new(user.clone());
                        new.is_admin = reg.user_count() == 0;
                        reg.register_user(new)?.id
                    }
                    Err(e) => return Err(e),
                };
                let report = match kind.as_str() {
                    "schema" => serde_json::to_value(reg.import_schema(uid, &doc, format, source_url.as_deref())?),
                    "records" => {
                        let schema = schema
                            .as_deref()
                            .ok_or_else(|| Error::Validation("--schema is required for records".into()))?;
                        let collection = collection
                            .as_deref()
                            .ok_or_else(|| Error::Validation("--collection is required for records".into()))?;
                        let schema = resolve_schema(&reg, schema)?;
                        serde_json::to_value(reg.import_records(uid, &doc, format, schema, collection)?)
                    }
                    other => return Err(Error::Validation(format!("unknown import kind `{other}`"))),
                }
                .map_err(|e| Error::Storage(e.to_string()))?;
                reg.drain_queue();
                reg.save()?;
                writeln!(out, "{}", serde_json::to_string_pretty(&report).unwrap_or_default()).map_err(io)?;
                Ok(0)
            }
            Command::Export {
                format,
                filter,
                include_versions,
                output,
            } => {
                let reg = open(&self.config(&[])?)?;
                let req = ExportRequest {
                    format: format.parse::<ExportFormat>()?,
                    filter: filter.filter(&reg)?,
                    include_versions: *include_versions,
                };
                let doc = reg.export(&req)?;
                match output {
                    Some(path) => std::fs::write(path, doc).map_err(io)?,
                    None => out.write_all(&doc).map_err(io)?,
                }
                Ok(0)
            }
            Command::Sweep => {
                let reg = open(&self.config(&[])?)?;
                let report = reg.run_sweep(&DefaultFetcher)?;
                reg.save()?;
                writeln!(out, "{}", serde_json::to_string_pretty(&report).unwrap_or_default()).map_err(io)?;
                Ok(0)
            }
            Command::MintCheck { sample } => {
                let reg = open(&self.config(&[])?)?;
                let check = reg.mint_check(*sample);
                writeln!(out, "{}", serde_json::to_string_pretty(&check).unwrap_or_default()).map_err(io)?;
                Ok(if check.ok() { 0 } else { 1 })
            }
        }
    }
}

fn open(cfg: &ServiceConfig) -> Result<Registry, Error> {
    Registry::open(cfg.registry_config()?, Arc::new(SystemClock))
}

async fn serve(cfg: ServiceConfig) -> Result<(), Error> {
    let reg = Arc::new(open(&cfg)?);
    let fetcher: Arc<dyn Fetcher> = Arc::new(DefaultFetcher);
    let schedule = tasks::Schedule {
        poll: cfg.poll_interval()?,
        digest: cfg.digest_interval()?,
        sweep: cfg.sweep_interval()?,
    };
    let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let handles = tasks::spawn(reg.clone(), fetcher.clone(), schedule, stop_rx);
    let addr = format!("{}:{}", cfg.server.bind, cfg.server.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(%addr, base_url = %cfg.base_url(), "listening");
    axum::serve(listener, router(AppState::new(reg.clone(), fetcher)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
        .map_err(|e| Error::Storage(e.to_string()))?;
    let _ = stop_tx.send(true);
    for h in handles {
        let _ = h.await;
    }
    let reg2 = reg.clone();
    tokio::task::spawn_blocking(move || {
        reg2.drain_queue();
        reg2.save()
    })
    .await
    .map_err(|e| Error::Storage(e.to_string()))??;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn subcommands_parse() {
        let c = Cli::try_parse_from(["termreg", "--store", "s.json", "mint-check", "--sample", "5"]).unwrap();
        assert!(matches!(c.command, Command::MintCheck { sample: 5 }));
        let c = Cli::try_parse_from(["termreg", "import", "--as", "ana", "--kind", "records", "x.json"]).unwrap();
        assert!(matches!(c.command, Command::Import { .. }));
        let c = Cli::try_parse_from(["termreg", "export", "--format", "skos", "--status", "accepted"]).unwrap();
        assert!(matches!(c.command, Command::Export { .. }));
        assert!(Cli::try_parse_from(["termreg", "serve", "--set", "novalue"]).is_err());
    }

    #[test]
    fn formats_from_extensions() {
        assert_eq!(guess_format(Path::new("a.ttl")), Some(Format::Turtle));
        assert_eq!(guess_format(Path::new("a.OWL")), Some(Format::RdfXml));
        assert_eq!(guess_format(Path::new("a.txt")), None);
    }

    #[test]
    fn import_export_mint_check_against_a_store() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("store.json").display().to_string();
        let outbox = dir.path().join("outbox.log").display().to_string();
        let schema = dir.path().join("v.ttl");
        std::fs::write(
            &schema,
            "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
             <http://e.org/v#title> rdfs:label \"Title\" ; rdfs:comment \"A name given to the resource.\" .\n",
        )
        .unwrap();
        let run = |args: &[&str]| {
            let mut argv = vec!["termreg", "--store", &store, "--set"];
            let ob = format!("store.outbox={outbox}");
            argv.push(&ob);
            argv.extend_from_slice(args);
            let mut out = Vec::new();
            let code = Cli::try_parse_from(argv).unwrap().run(&mut out).unwrap();
            (code, String::from_utf8(out).unwrap())
        };
        let (code, out) = run(&["import", "--as", "ana", "--create-user", schema.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.contains("\"created\""), "{out}");
        let (_, doc) = run(&["export", "--format", "json"]);
        assert!(doc.contains("Title"), "{doc}");
        let (code, out) = run(&["mint-check", "--sample", "2"]);
        assert_eq!(code, 0, "{out}");
    }
}
