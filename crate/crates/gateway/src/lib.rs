//! HTTP gateway for the vitalchat backend: sign-up, sensor ingestion, the
//! chat webhook, media serving and the loopback outbox, plus the background
//! delivery-retry and scheduler loops.

pub mod api;
pub mod config;
pub mod live;

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use vitalchat_core::clock::{Clock, SystemClock};
use vitalchat_core::delivery::MediaStore;
use vitalchat_core::orchestrator::{Orchestrator, Services};
use vitalchat_core::store::{JournalStore, Storage};

pub use api::{router, AppState};
pub use config::{ClientKind, GatewayConfig, TransportKind};
pub use live::LiveClient;

/// Opens the journal under `data_dir`, or an in-memory store.
pub fn open_store(data_dir: Option<&Path>) -> anyhow::Result<Arc<dyn Storage>> {
    Ok(match data_dir {
        Some(dir) => Arc::new(JournalStore::open(dir).with_context(|| format!("opening store in {}", dir.display()))?),
        None => Arc::new(JournalStore::in_memory()),
    })
}

/// Wires store, media, model clients and transport from the config.
pub fn build_state(config: &GatewayConfig, clock: Arc<dyn Clock>) -> anyhow::Result<AppState> {
    let store = open_store(config.data_dir.as_deref())?;
    let (mut services, loopback) = Services::offline(store, clock);
    if let Some(dir) = &config.data_dir {
        services.media = Arc::new(MediaStore::on_disk(dir.join("media")).context("opening media store")?);
    }
    if config.client == ClientKind::Live {
        let live = Arc::new(LiveClient::from_env().context("live model client")?);
        services.interpreter = live.clone();
        services.agent = live;
    }
    let TransportKind::Loopback = config.transport;
    let orchestrator = Orchestrator::new(services, config.orchestrator.clone())?;
    Ok(AppState {
        orchestrator: Arc::new(orchestrator),
        loopback,
    })
}

/// Delivery retries and scheduler ticks on fixed intervals.
pub fn spawn_background(state: &AppState, retry_every: Duration, tick_every: Duration) -> Vec<tokio::task::JoinHandle<()>> {
    let orch = state.orchestrator.clone();
    let retry = tokio::spawn(async move {
        let mut timer = tokio::time::interval(retry_every);
        loop {
            timer.tick().await;
            let o = orch.clone();
            match tokio::task::spawn_blocking(move || o.retry_deliveries()).await {
                Ok(n) if n > 0 => tracing::info!(sent = n, "retried queued messages"),
                Ok(_) => {}
                Err(e) => tracing::error!(error = %e, "retry task failed"),
            }
        }
    });
    let orch = state.orchestrator.clone();
    let ticks = tokio::spawn(async move {
        let mut timer = tokio::time::interval(tick_every);
        loop {
            timer.tick().await;
            let o = orch.clone();
            match tokio::task::spawn_blocking(move || o.run_due(o.now())).await {
                Ok(Ok(n)) if n > 0 => tracing::info!(fired = n, "scheduled tasks ran"),
                Ok(Ok(_)) => {}
                Ok(Err(e)) => tracing::error!(error = %e, "scheduler tick failed"),
                Err(e) => tracing::error!(error = %e, "scheduler task failed"),
            }
        }
    });
    vec![retry, ticks]
}

/// Binds, serves until Ctrl-C, then stops the background loops.
pub async fn serve(config: GatewayConfig) -> anyhow::Result<()> {
    let state = build_state(&config, Arc::new(SystemClock))?;
    let background = spawn_background(
        &state,
        Duration::from_secs(config.retry_interval_s.max(1)),
        Duration::from_secs(config.tick_interval_s.max(1)),
    );
    let app = router(state, config.max_body_bytes);
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .with_context(|| format!("binding {}", config.listen))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    for h in background {
        h.abort();
    }
    Ok(())
}
