//! Periodic metrics polling and outbox delivery.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use contest_core::metrics::{LiveStubs, MetricsProvider, SimulatedProvider};
use contest_core::syndication::outbox::FileSink;
use contest_core::syndication::{DeliveryAdapter, OutboxPost};
use tokio::task::JoinHandle;

use crate::service::Service;

pub const DRAIN_BATCH: usize = 50;

/// Writes posts to the log instead of an external channel.
#[derive(Debug, Default)]
pub struct LogAdapter;

impl DeliveryAdapter for LogAdapter {
    fn deliver(&self, post: &OutboxPost) -> Result<(), String> {
        tracing::info!(post = %post.post_id, channel = %post.channel_id, body = %post.body, "post delivered to log");
        Ok(())
    }
}

/// The fixture replay when one is configured, else the inert live stubs.
pub fn provider_for(service: &Service) -> Result<Arc<dyn MetricsProvider>, String> {
    match &service.config().metrics_fixture {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let provider = SimulatedProvider::from_fixture(&text, service.config().contest.submission_open)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            Ok(Arc::new(provider))
        }
        None => Ok(Arc::new(LiveStubs::default())),
    }
}

pub fn adapter_for(sink: Option<&Path>) -> Result<Arc<dyn DeliveryAdapter>, String> {
    match sink {
        Some(path) => Ok(Arc::new(FileSink::open(path).map_err(|e| format!("{}: {e}", path.display()))?)),
        None => Ok(Arc::new(LogAdapter)),
    }
}

pub fn spawn_poller(service: Arc<Service>, provider: Arc<dyn MetricsProvider>) -> JoinHandle<()> {
    let period = Duration::from_secs(service.config().poll_interval_secs.max(1));
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(period);
        loop {
            ticker.tick().await;
            let (svc, prov) = (service.clone(), provider.clone());
            match tokio::task::spawn_blocking(move || svc.poll_once(prov.as_ref())).await {
                Ok(Ok(report)) => tracing::info!(
                    samples = report.samples.len(),
                    failures = report.failures.len(),
                    "poll cycle finished"
                ),
                Ok(Err(e)) => tracing::error!(error = %e, "poll cycle failed"),
                Err(e) => tracing::error!(error = %e, "poll task panicked"),
            }
        }
    })
}

pub fn spawn_drainer(service: Arc<Service>, adapter: Arc<dyn DeliveryAdapter>) -> JoinHandle<()> {
    let period = Duration::from_secs(service.config().outbox_drain_interval_secs.max(1));
    tokio::spawn(async move {
        // Claims left by a previous process that died mid-delivery.
        if let Err(e) = service.release_outbox_claims() {
            tracing::error!(error = %e, "could not release stale outbox claims");
        }
        let mut ticker = tokio::time::interval(period);
        loop {
            ticker.tick().await;
            let (svc, ad) = (service.clone(), adapter.clone());
            match tokio::task::spawn_blocking(move || svc.drain_outbox(ad.as_ref(), DRAIN_BATCH, "drainer")).await {
                Ok(Ok(report)) if !report.outcomes.is_empty() => {
                    tracing::info!(delivered = report.delivered(), failed = report.failed(), "outbox drained")
                }
                Ok(Ok(_)) => {}
                Ok(Err(e)) => tracing::error!(error = %e, "outbox drain failed"),
                Err(e) => tracing::error!(error = %e, "drain task panicked"),
            }
        }
    })
}
