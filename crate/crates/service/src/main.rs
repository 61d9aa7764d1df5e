use std::net::SocketAddr;

use clap::Parser;
use heartcast_service::{router, AppState};

#[derive(Debug, Parser)]
#[command(name = "heartcast-service", version, about = "HTTP API for heartcast forecasts")]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt::init();
    let args = Args::parse();
    let addr: SocketAddr = format!("{}:{}", args.bind, args.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad --bind/--port: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {addr}");
    axum::serve(listener, router(AppState::default())).await
}
