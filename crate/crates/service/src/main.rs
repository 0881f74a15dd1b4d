use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use topofuse_service::{app, AppState};

/// Serves interactive fusion sessions over HTTP.
#[derive(Debug, Parser)]
#[command(name = "topofuse-service", version)]
struct Args {
    /// Listen address.
    #[arg(long, env = "TOPOFUSE_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Directory for per-session artifacts.
    #[arg(long, env = "TOPOFUSE_DATA_DIR", default_value = "topofuse-sessions")]
    data_dir: PathBuf,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let listener = match tokio::net::TcpListener::bind(args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.bind);
            return ExitCode::from(1);
        }
    };
    eprintln!("listening on {}", args.bind);
    match axum::serve(listener, app(AppState::new(args.data_dir))).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
