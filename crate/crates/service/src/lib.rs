//! HTTP service exposing the classification graph, sessions, telemetry
//! ingestion and analytics, backed by files under a data directory.
//!
//! Layout of the data directory:
//!
//! ```text
//! content/<version>/graph.json            archived graph per content version
//! content/<version>/graph.support.json    its support catalog
//! sessions/<id>.events.ndjson             session event log
//! sessions/<id>.snapshot.json             latest session snapshot
//! telemetry/telemetry-YYYY-MM-DD.ndjson   interaction events by day
//! surveys/responses.ndjson                imported Likert responses
//! ```

mod api;
mod config;
mod error;
mod state;

pub use api::router;
pub use config::ServiceConfig;
pub use error::ApiError;
pub use state::{AppState, ServiceError};

/// Opens the state, binds `config.listen_addr` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::open(&config)?;
    let listener = tokio::net::TcpListener::bind(config.listen_addr)
        .await
        .map_err(|source| ServiceError::Io {
            context: format!("bind {}", config.listen_addr),
            source,
        })?;
    tracing::info!(addr = %config.listen_addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServiceError::Io {
            context: "serve".into(),
            source,
        })
}
