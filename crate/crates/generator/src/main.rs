//! `databom-gen`: batch and continuous registration of artifact metadata.
//!
//! Environment: `DATABOM_GATEWAY_URL` (default http://127.0.0.1:8080) and
//! `DATABOM_KEY_FILE` (the caller's key file; its name selects the signing
//! key on the gateway).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use databom_generator::watch::DEFAULT_DEBOUNCE_MS;
use databom_generator::{scan_once, GatewayClient};

#[derive(Parser)]
#[command(name = "databom-gen", about = "DataBOM generator", version)]
struct Cli {
    /// Gateway base URL; overrides DATABOM_GATEWAY_URL.
    #[arg(long, global = true)]
    gateway: Option<String>,
    /// Key file of the acting stakeholder; overrides DATABOM_KEY_FILE.
    #[arg(long, global = true)]
    key_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan an artifact tree once and register what changed.
    Scan {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        project: String,
        #[arg(long)]
        year: u16,
    },
    /// Watch an artifact tree and register changes continuously.
    Watch {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEBOUNCE_MS)]
        debounce_ms: u64,
        #[arg(long, env = "DATABOM_PROJECT")]
        project: String,
        #[arg(long, env = "DATABOM_YEAR")]
        year: u16,
    },
}

fn build_client(cli: &Cli) -> Result<GatewayClient, databom_core::Error> {
    let url = cli
        .gateway
        .clone()
        .or_else(|| std::env::var("DATABOM_GATEWAY_URL").ok())
        .unwrap_or_else(|| "http://127.0.0.1:8080".to_string());
    let key_file = cli
        .key_file
        .clone()
        .or_else(|| std::env::var("DATABOM_KEY_FILE").ok().map(PathBuf::from));
    match key_file {
        Some(path) => GatewayClient::with_key_file(url, &path),
        None => Ok(GatewayClient::new(url)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let client = match build_client(&cli) {
        Ok(client) => client,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    match cli.command {
        Command::Scan {
            root,
            project,
            year,
        } => {
            let report = scan_once(&client, &root, &project, year);
            match serde_json::to_string_pretty(&report) {
                Ok(json) => println!("{json}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            }
            if report.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Watch {
            root,
            debounce_ms,
            project,
            year,
        } => match databom_generator::watch::watch(&client, &root, debounce_ms, &project, year) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
