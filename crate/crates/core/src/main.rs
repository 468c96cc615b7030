use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use medbeads::api::{self, ApiConfig};
use medbeads::fhir::{self, FhirError};
use medbeads::store::StoreError;
use medbeads::{BeadId, Engine, EngineConfig, Error, Role};
use serde::Serialize;

/// Tamper-evident clinical event store.
#[derive(Debug, Parser)]
#[command(name = "medbeads", version)]
struct Cli {
    /// Store directory (objects/ and index.db live here)
    #[arg(long, global = true, env = "MEDBEADS_DATA_DIR", default_value = "medbeads-data")]
    data_dir: PathBuf,
    /// Emit machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert FHIR bundles (files or directories of *.json) into beads
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Also write all conversion stats as JSON to this file
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Exit 1 if any bundle has more dangling references than this
        #[arg(long)]
        max_dangling: Option<usize>,
    },
    /// Re-hash every object and report corruption and its blast radius
    Verify,
    /// Rebuild the index from the object files
    Reindex,
    /// Print one bead
    Get { id: BeadId },
    /// Print the causal context of a bead
    Context {
        id: BeadId,
        #[arg(long, default_value_t = 5)]
        depth: u32,
        #[arg(long)]
        role: Option<Role>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Walk children instead of parents
        #[arg(long)]
        descendants: bool,
    },
    /// List patient roots
    Patients,
    /// Run the HTTP API until interrupted
    Serve {
        #[arg(long, env = "MEDBEADS_ADDR", default_value = api::DEFAULT_ADDR)]
        addr: String,
        /// Allowed CORS origin (default: any)
        #[arg(long)]
        cors_origin: Option<String>,
        /// Static UI directory served under /ui
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

enum Failure {
    Domain(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match &e {
            Error::Store(StoreError::Io { .. }) | Error::Fhir(FhirError::Io { .. } | FhirError::Parse { .. }) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<FhirError> for Failure {
    fn from(e: FhirError) -> Failure {
        Error::Fhir(e).into()
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Outcome {
    let engine = Engine::open(&cli.data_dir, EngineConfig::default())?;
    if !matches!(cli.command, Command::Reindex) {
        if let Some(stats) = engine.ensure_index()? {
            tracing::info!(records = stats.records_written, "rebuilt missing index");
        }
    }
    match cli.command {
        Command::Ingest {
            paths,
            summary,
            max_dangling,
        } => ingest(&engine, cli.json, &paths, summary, max_dangling),
        Command::Verify => {
            let report = engine.verify_all()?;
            if cli.json {
                print_json(&report);
            } else {
                println!("checked {}", report.checked);
                for c in &report.corrupted {
                    println!("corrupted {} {}", c.id, serde_json::to_string(&c.corruption).unwrap_or_default());
                }
                for id in &report.missing {
                    println!("missing {id}");
                }
                for id in &report.broken_descendants {
                    println!("broken {id}");
                }
                println!("status {}", if report.is_pristine() { "pristine" } else { "corrupted" });
            }
            if report.is_pristine() {
                Ok(())
            } else {
                Err(Failure::Domain(format!(
                    "{} corrupted, {} missing, {} broken descendants",
                    report.corrupted.len(),
                    report.missing.len(),
                    report.broken_descendants.len()
                )))
            }
        }
        Command::Reindex => {
            let stats = engine.reindex()?;
            if cli.json {
                print_json(&serde_json::json!({
                    "objects_scanned": stats.objects_scanned,
                    "records_written": stats.records_written,
                    "edges_written": stats.edges_written,
                    "skipped_corrupted": stats.skipped_corrupted,
                    "duration_ms": stats.duration.as_millis() as u64,
                }));
            } else {
                println!("objects {}", stats.objects_scanned);
                println!("records {}", stats.records_written);
                println!("edges {}", stats.edges_written);
                println!("skipped_corrupted {}", stats.skipped_corrupted);
                println!("duration_ms {}", stats.duration.as_millis());
            }
            Ok(())
        }
        Command::Get { id } => {
            let bead = engine.get(&id)?;
            if cli.json {
                println!("{}", serde_json::to_string(&bead).expect("serializable"));
            } else {
                print_json(&bead);
            }
            Ok(())
        }
        Command::Context {
            id,
            depth,
            role,
            format,
            descendants,
        } => {
            let result = if descendants {
                engine.get_descendants(&id, Some(depth), role)?
            } else {
                engine.get_context(&id, Some(depth), role)?
            };
            match (format, cli.json) {
                (Format::Text, false) => print!("{}", medbeads::traversal::serialize_context(&result)),
                _ => print_json(&result),
            }
            Ok(())
        }
        Command::Patients => {
            let patients = engine.patients()?;
            if cli.json {
                print_json(&patients);
            } else {
                for p in &patients {
                    println!(
                        "{} {} beads={} {}",
                        p.id,
                        p.timestamp,
                        p.bead_count,
                        p.name.as_deref().unwrap_or("-")
                    );
                }
            }
            Ok(())
        }
        Command::Serve {
            addr,
            cors_origin,
            ui_dir,
        } => serve(engine, &addr, ApiConfig { cors_origin, ui_dir }),
    }
}

fn ingest(
    engine: &Engine,
    json: bool,
    paths: &[PathBuf],
    summary: Option<PathBuf>,
    max_dangling: Option<usize>,
) -> Outcome {
    let mut files = Vec::new();
    for p in paths {
        files.extend(fhir::bundle_paths(p)?);
    }
    let mut conversions = Vec::new();
    let mut problems = Vec::new();
    for file in &files {
        let bundle = fhir::load_bundle(file)?;
        let conversion = match fhir::convert_bundle(&bundle, engine) {
            Ok(c) => c,
            Err(e) => {
                problems.push(format!("{}: {e}", file.display()));
                continue;
            }
        };
        if !json {
            print!("{}", fhir::render_stats(&conversion));
        }
        let totals = conversion.stats.totals();
        if totals.failed > 0 {
            problems.push(format!("{}: {} resources failed", file.display(), totals.failed));
        }
        if max_dangling.is_some_and(|max| totals.dangling_references > max) {
            problems.push(format!(
                "{}: {} dangling references",
                file.display(),
                totals.dangling_references
            ));
        }
        conversions.push(conversion);
    }
    if json {
        print_json(&conversions);
    }
    if let Some(path) = summary {
        let text = serde_json::to_string_pretty(&conversions).expect("serializable");
        std::fs::write(&path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain(problems.join("; ")))
    }
}

fn serve(engine: Engine, addr: &str, config: ApiConfig) -> Outcome {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::Usage(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| Failure::Usage(e.to_string()))?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        let app = api::router(Arc::new(engine), &config);
        api::serve(listener, app, shutdown_signal())
            .await
            .map_err(|e| Failure::Usage(e.to_string()))?;
        println!("shutdown complete");
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
