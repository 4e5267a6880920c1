//! Annotation service: task lifecycle, annotation persistence, model
//! suggestions and the retraining loop over HTTP/JSON.

pub mod backend;
pub mod config;
pub mod error;
pub mod routes;
pub mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use policyloop_core::manager::REGISTRY_FILE;
use policyloop_core::{ExtractionManager, OpenOptions};

pub use backend::{ExtractionBackend, LocalBackend, RemoteBackend, ServedSuggestions, TrainAccepted, TrainRequest};
pub use config::{Role, ServiceConfig};
pub use error::{ApiError, ErrorBody, ServiceError};
pub use routes::{api_router, internal_router, AnnotationRequest, AnnotationResponse, AppState, TaskDetail};
pub use store::{AnnotationRecord, FileStore, NewTask, Task, TaskId, TaskRepository, TaskStatus};

/// Opens the extractor registry; it must have been initialised.
pub fn open_registry(config: &ServiceConfig) -> Result<ExtractionManager, ServiceError> {
    if !config.registry_dir.join(REGISTRY_FILE).is_file() {
        return Err(ServiceError::MissingRegistry(config.registry_dir.clone()));
    }
    Ok(ExtractionManager::open_with(
        &config.registry_dir,
        &OpenOptions {
            autotrain_every: config.autotrain_every,
        },
    )?)
}

/// Builds the router for `config.role`. Blocking: opens stores and, for the
/// annotation role, fetches the schema from the extraction service.
pub fn build_app(config: &ServiceConfig) -> Result<Router, ServiceError> {
    config.validate()?;
    let annotation = |backend: Arc<dyn ExtractionBackend>| -> Result<Router, ServiceError> {
        let schema = backend.schema().map_err(ServiceError::Backend)?;
        let store = FileStore::open(&config.data_dir).map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(api_router(AppState::new(Arc::new(store), backend, schema)))
    };
    match config.role {
        Role::Combined => {
            let local = Arc::new(LocalBackend::new(open_registry(config)?));
            Ok(annotation(local.clone())?.merge(internal_router(local)))
        }
        Role::Extraction => Ok(internal_router(Arc::new(LocalBackend::new(open_registry(config)?)))),
        Role::Annotation => {
            let url = config.extraction_url.clone().expect("validated");
            annotation(Arc::new(RemoteBackend::new(url)))
        }
    }
}

/// Serves `app` on `listener` until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Binds `127.0.0.1:<port>` (port 0 picks a free one), announces the
/// address on stdout and serves until `shutdown`.
pub async fn serve(
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let cfg = config.clone();
    let app = tokio::task::spawn_blocking(move || build_app(&cfg))
        .await
        .map_err(|e| ServiceError::Config(format!("startup panicked: {e}")))??;
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], config.port))).await?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, role = ?config.role, "serving");
    println!("policyloop listening on http://{addr}");
    serve_on(listener, app, shutdown).await
}
