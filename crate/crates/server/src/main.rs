use std::path::PathBuf;
use std::process::ExitCode;

use adlsim_core::analysis::{build_report, render_text, FailureMode};
use adlsim_core::export::{export_transcript, ExportFormat};
use adlsim_core::session::SessionId;
use adlsim_core::store::{JsonlStore, Store};
use adlsim_server::{build_state, router, ServerConfig};
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

/// Dementia-care ADL simulator service and study tooling.
#[derive(Parser)]
#[command(name = "adlsim", version)]
struct Cli {
    /// Data directory holding the JSONL logs (overrides ADLSIM_DATA_DIR).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service (the default).
    Serve {
        /// Address to listen on (overrides ADLSIM_BIND).
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
        /// Use the offline deterministic model backend.
        #[arg(long)]
        mock: bool,
    },
    /// Print the analysis report for the logged study data.
    Report {
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
    },
    /// Print one simulation transcript.
    Export {
        session: String,
        simulation: u32,
        #[arg(long, default_value = "txt")]
        format: String,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attach failure-mode codes to a turn; no codes clears them.
    Annotate {
        session: String,
        simulation: u32,
        turn: u32,
        codes: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
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

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn run(cli: Cli) -> CliResult {
    let mut config = ServerConfig::from_env()?;
    if let Some(dir) = cli.data_dir {
        config.data_dir = dir;
    }
    match cli.command.unwrap_or(Command::Serve { bind: None, mock: false }) {
        Command::Serve { bind, mock } => {
            if let Some(bind) = bind {
                config.bind = bind;
            }
            config.mock |= mock;
            serve(config)
        }
        Command::Report { format } => {
            let snapshot = JsonlStore::open(&config.data_dir)?.load_all()?.snapshot();
            let report = build_report(&snapshot);
            match format {
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
                ReportFormat::Text => print!("{}", render_text(&report)),
            }
            Ok(())
        }
        Command::Export { session, simulation, format, out } => {
            let id = SessionId::parse(&session).ok_or_else(|| format!("`{session}` is not a session id"))?;
            let format = ExportFormat::parse(&format)?;
            let snapshot = JsonlStore::open(&config.data_dir)?.load_all()?.snapshot();
            let doc = export_transcript(&snapshot, &id, simulation, format)?;
            match out {
                Some(path) => std::fs::write(path, doc.body)?,
                None => print!("{}", doc.body),
            }
            Ok(())
        }
        Command::Annotate { session, simulation, turn, codes } => {
            let id = SessionId::parse(&session).ok_or_else(|| format!("`{session}` is not a session id"))?;
            let codes = codes
                .iter()
                .map(|c| FailureMode::parse(c).ok_or_else(|| format!("unknown failure code `{c}`")))
                .collect::<Result<Vec<_>, _>>()?;
            // annotation never calls the model
            config.mock = true;
            let state = build_state(&config)?;
            let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
            let record = runtime.block_on(state.engine.annotate(&id, simulation, turn, &codes))?;
            let codes: Vec<&str> = record.failure_codes.iter().flatten().map(|c| c.as_str()).collect();
            println!("{} simulation {} turn {}: [{}]", record.session_id, simulation, turn, codes.join(", "));
            Ok(())
        }
    }
}

fn serve(config: ServerConfig) -> CliResult {
    let state = build_state(&config)?;
    let app = router(state, config.cors_origin.as_deref(), config.ui_dir.as_deref());
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.bind).await?;
        tracing::info!(
            addr = %listener.local_addr()?,
            backend = if config.mock { "mock" } else { "live" },
            data_dir = %config.data_dir.display(),
            "listening"
        );
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
