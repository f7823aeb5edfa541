use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

use beaconplan_server::{router, AppState, Config};

#[derive(Parser)]
#[command(name = "beaconplan-server", version, about = "HTTP service for beacon planning projects")]
struct Args {
    #[arg(long, env = "BEACONPLAN_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Directory holding one archive per project.
    #[arg(long, env = "BEACONPLAN_STORE", default_value = "projects")]
    store: PathBuf,
    /// Detection jobs allowed to run at once.
    #[arg(long, env = "BEACONPLAN_WORKERS", default_value_t = 2)]
    workers: usize,
    /// Shared bearer token; requests are unauthenticated when unset.
    #[arg(long, env = "BEACONPLAN_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) {
        logger.write_style(env_logger::WriteStyle::Never);
    }
    logger.init();
    let args = Args::parse();
    let state = AppState::new(Config { store: args.store.clone(), workers: args.workers, token: args.token })?;
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    log::info!("listening on {} with store {}", listener.local_addr()?, args.store.display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
