use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context as _;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use parley_core::config::Config;
use parley_core::engine::Engine;
use parley_service::{router, AppState};

/// HTTP session service for the parley dialogue engine.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Config file, ./parley.toml when present; PARLEY_* environment variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "0.0.0.0")]
    host: String,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let implicit = std::path::Path::new("parley.toml");
    let path = args.config.as_deref().or_else(|| implicit.is_file().then_some(implicit));
    let mut config = Config::resolve(path)?;
    if let Some(p) = args.port {
        config.port = p;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let engine = tokio::task::spawn_blocking({
        let config = config.clone();
        move || Engine::load(&config)
    })
    .await??;
    tracing::info!(
        fixtures = %config.fixtures.display(),
        data = %config.data_dir.display(),
        classifier = config.classifier.as_str(),
        "engine loaded"
    );

    let app = router(AppState::new(engine), config.static_dir.as_deref());
    let addr: SocketAddr = format!("{}:{}", args.host, config.port).parse().context("bad listen address")?;
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
