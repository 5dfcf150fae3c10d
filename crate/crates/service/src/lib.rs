//! HTTP task service: upload datasets, run discovery, validation and
//! scenario tasks on a worker pool, page through persisted results and
//! resolve duplicates interactively.
//!
//! All state lives in plain files under one storage root, so a restarted
//! process picks up where the previous one stopped.

pub mod api;
pub mod query;
pub mod session;
pub mod store;
pub mod tasks;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use session::Sessions;
use store::Store;
use tasks::Tasks;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub root: PathBuf,
    /// Tasks executed concurrently.
    pub workers: usize,
    /// Threads each task may use; 0 shares one global pool.
    pub engine_threads: usize,
}

pub struct Service {
    pub store: Arc<Store>,
    pub tasks: Arc<Tasks>,
    pub sessions: Sessions,
}

impl Service {
    /// Opens the storage root and starts the workers. Needs a tokio runtime.
    pub fn open(cfg: &ServiceConfig) -> std::io::Result<Arc<Service>> {
        let store = Arc::new(Store::open(&cfg.root)?);
        let tasks = Tasks::start(store.clone(), cfg.workers, cfg.engine_threads)?;
        Ok(Arc::new(Service {
            sessions: Sessions::new(store.clone()),
            store,
            tasks,
        }))
    }
}

/// Serves until the listener fails. `on_ready` receives the bound address.
pub async fn serve(
    listener: tokio::net::TcpListener,
    cfg: ServiceConfig,
    on_ready: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let service = Service::open(&cfg)?;
    let addr = listener.local_addr()?;
    on_ready(addr);
    axum::serve(listener, api::router(service)).await
}
