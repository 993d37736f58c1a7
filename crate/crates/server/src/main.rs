use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use contest_core::credentials::{Argon2Hasher, CredentialHasher};
use contest_core::syndication::TemplateSet;
use contest_core::TopicCatalog;
use contest_server::clock::SystemClock;
use contest_server::config::ServiceConfig;
use contest_server::service::{ExportKind, Service};
use contest_server::{api, simulate, workers};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "contest", version, about = "Contest platform service and offline simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service with its metrics poller and outbox drainer.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay a whole contest on virtual time and write every export.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Scenario document: participants and metric samples.
        #[arg(long)]
        fixture: PathBuf,
        /// Jury score file; repeat once per juror.
        #[arg(long = "jury", required = true)]
        jury: Vec<PathBuf>,
        #[arg(long, default_value = "simulation-out")]
        out: PathBuf,
    },
    /// Write one export from the persisted store.
    Export {
        #[arg(long)]
        config: PathBuf,
        /// rankings-country, rankings-category, winners, samples, outbox or snapshot
        #[arg(long)]
        kind: String,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the digest to put in a juror or admin credential entry.
    HashPassword {
        #[arg(long, env = "CONTEST_PASSWORD")]
        password: String,
    },
}

fn load_config(path: &Path) -> Result<ServiceConfig, String> {
    let mut config = ServiceConfig::load(path).map_err(|e| e.to_string())?;
    config.apply_env();
    Ok(config)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Serve { config } => serve(load_config(&config)?),
        Command::Simulate { config, fixture, jury, out } => {
            let config = load_config(&config)?;
            let catalog = match &config.topic_catalog {
                Some(p) => TopicCatalog::from_json(&std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?)
                    .map_err(|e| format!("{}: {e}", p.display()))?,
                None => TopicCatalog::default_catalog(),
            };
            let templates = match &config.templates_dir {
                Some(dir) => TemplateSet::load_dir(dir).map_err(|e| e.to_string())?,
                None => TemplateSet::builtin(),
            };
            let scenario = simulate::load_scenario(&fixture).map_err(|e| e.to_string())?;
            let jury = jury.iter().map(|p| simulate::load_jury_file(p)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
            let outcome = simulate::run(&config, catalog, templates, &scenario, &jury).map_err(|e| e.to_string())?;
            outcome.write_to(&out).map_err(|e| e.to_string())?;
            for line in &outcome.summary.skipped {
                tracing::warn!("{line}");
            }
            println!(
                "{} winners in {} categories; exports written to {}",
                outcome.summary.winner_count,
                outcome.summary.categories_awarded.len(),
                out.display()
            );
            Ok(())
        }
        Command::Export { config, kind, out } => {
            let config = load_config(&config)?;
            if config.store_path.is_none() {
                return Err("export needs store_path in the config or CONTEST_STORE_PATH".into());
            }
            let kind = ExportKind::parse(&kind).ok_or_else(|| format!("unknown export kind {kind:?}"))?;
            let service = Service::from_config(config, Arc::new(SystemClock), Arc::new(Argon2Hasher::new()))?;
            let export = service.export(kind).map_err(|e| format!("{}: {e}", e.code()))?;
            match out {
                Some(path) => std::fs::write(&path, export.body).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    print!("{}", export.body);
                    Ok(())
                }
            }
        }
        Command::HashPassword { password } => {
            println!("{}", Argon2Hasher::new().digest(&password));
            Ok(())
        }
    }
}

fn serve(config: ServiceConfig) -> Result<(), String> {
    let addr = config.listen_addr().to_string();
    let sink = config.outbox_sink.clone();
    let service = Arc::new(Service::from_config(config, Arc::new(SystemClock), Arc::new(Argon2Hasher::new()))?);
    let provider = workers::provider_for(&service)?;
    let adapter = workers::adapter_for(sink.as_deref())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| format!("{addr}: {e}"))?;
        tracing::info!(%addr, store = %service.health().map(|h| h.store).unwrap_or_default(), "listening");
        workers::spawn_poller(service.clone(), provider);
        workers::spawn_drainer(service.clone(), adapter);
        axum::serve(listener, api::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    })
}
