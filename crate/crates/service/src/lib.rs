//! HTTP front end for the training and generation pipeline.
//!
//! Long-running work (training, generation) is submitted as a task and
//! polled. Documents live on disk under the data directory, one JSON file
//! each; see [`store`].

mod api;
pub mod docs;
mod jobs;
mod state;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tower_http::services::ServeDir;

pub use api::ApiError;
pub use state::RESTART_REASON;
pub use store::{Store, StoreError};

/// The small built-in dataset, installed into an empty data directory.
pub const DEMO_DATASET: &str = include_str!("../data/demo.csv");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    pub workers: usize,
    /// Bearer token required on non-GET routes when set.
    pub token: Option<String>,
    /// Static files (the web UI) served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("bad environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get().saturating_sub(1).max(1))
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> ServiceConfig {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: data_dir.into(),
            workers: default_workers(),
            token: None,
            static_dir: None,
        }
    }

    /// Reads `MOLGEN_BIND`, `MOLGEN_DATA_DIR`, `MOLGEN_WORKERS`,
    /// `MOLGEN_TOKEN` and `MOLGEN_STATIC_DIR` over the defaults.
    pub fn from_env() -> Result<ServiceConfig, ServiceError> {
        let mut c = ServiceConfig::new(std::env::var("MOLGEN_DATA_DIR").unwrap_or_else(|_| "molgen-data".into()));
        if let Ok(b) = std::env::var("MOLGEN_BIND") {
            c.bind = b.parse().map_err(|e: std::net::AddrParseError| ServiceError::Env {
                name: "MOLGEN_BIND",
                message: e.to_string(),
            })?;
        }
        if let Ok(w) = std::env::var("MOLGEN_WORKERS") {
            c.workers = w.parse().map_err(|e: std::num::ParseIntError| ServiceError::Env {
                name: "MOLGEN_WORKERS",
                message: e.to_string(),
            })?;
        }
        c.token = std::env::var("MOLGEN_TOKEN").ok().filter(|t| !t.is_empty());
        c.static_dir = std::env::var("MOLGEN_STATIC_DIR").ok().map(PathBuf::from);
        Ok(c)
    }
}

/// A service bound to a port and running in the background.
pub struct RunningService {
    pub addr: SocketAddr,
    state: state::State,
    shutdown: Option<oneshot::Sender<()>>,
    server: tokio::task::JoinHandle<()>,
    workers: Vec<tokio::task::JoinHandle<()>>,
}

impl RunningService {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops serving and abandons running tasks without recording their
    /// outcome, as a crash would. They are marked failed on the next start.
    pub async fn stop(mut self) {
        self.state.halted.store(true, Ordering::SeqCst);
        for c in self.state.controls.lock().unwrap().values() {
            c.cancel.store(true, Ordering::SeqCst);
        }
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.server).await;
        for w in &self.workers {
            w.abort();
        }
    }

    /// Serves until `signal` resolves.
    pub async fn run_until(self, signal: impl std::future::Future<Output = ()>) {
        signal.await;
        self.stop().await;
    }
}

fn app(state: state::State, static_dir: Option<&PathBuf>) -> Router {
    let api = api::router(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Opens the store, recovers tasks, binds and starts serving.
pub async fn start(config: &ServiceConfig) -> Result<RunningService, ServiceError> {
    let store = Store::open(&config.data_dir)?;
    let demo = store.datasets_dir().join("demo.csv");
    if !demo.exists() {
        std::fs::write(&demo, DEMO_DATASET)?;
    }
    let (shared, rx) = state::Shared::recover(store, config.token.clone())?;
    let state = Arc::new(shared);
    let workers = jobs::spawn_workers(state.clone(), rx, config.workers);
    let listener = TcpListener::bind(config.bind).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let router = app(state.clone(), config.static_dir.as_ref());
    let server = tokio::spawn(async move {
        let _ = axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    tracing::info!(%addr, "molgen service listening");
    Ok(RunningService {
        addr,
        state,
        shutdown: Some(tx),
        server,
        workers,
    })
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServiceError> {
    let running = start(config).await?;
    running
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    Ok(())
}
