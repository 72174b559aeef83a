//! HTTP API over journaled editing sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | multipart `image`; opens a session (201) |
//! | GET | `/sessions/{id}` | session resource |
//! | POST | `/sessions/{id}/inserts` | multipart `image`; registers an image for MELD |
//! | POST | `/sessions/{id}/ops` | `{"op": "CROP", "params": {...}}` |
//! | POST | `/sessions/{id}/undo`, `/redo` | 409 when there is nothing to undo or redo |
//! | GET | `/sessions/{id}/journal` | canonical journal text |
//! | GET | `/sessions/{id}/image?state=n` | PNG of recorded state `n` (default current) |
//! | POST | `/sessions/{id}/export` | `{"format": "png", "quality": 95, "file": "..."}` |
//! | POST | `/verify` | multipart `source`, `journal`, `claimed`, `insert`* |
//!
//! Errors are JSON `{code, message, seq?, line?}`.

mod error;
mod params;
mod routes;
mod state;

use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

pub use error::ApiError;
pub use params::OpRequest;
pub use routes::{ExportRequest, ExportResponse, InsertResource, SessionResource, VerifyResponse};
pub use state::{AppState, Config};

pub fn router(state: AppState) -> Router {
    let limit = state.config().max_upload_bytes;
    Router::new()
        .route("/sessions", post(routes::create_session))
        .route("/sessions/{id}", get(routes::get_session))
        .route("/sessions/{id}/inserts", post(routes::add_insert))
        .route("/sessions/{id}/ops", post(routes::apply_op))
        .route("/sessions/{id}/undo", post(routes::undo))
        .route("/sessions/{id}/redo", post(routes::redo))
        .route("/sessions/{id}/journal", get(routes::journal))
        .route("/sessions/{id}/image", get(routes::image))
        .route("/sessions/{id}/export", post(routes::export))
        .route("/verify", post(routes::verify_upload))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serves until ctrl-c, dropping idle sessions in the background.
pub async fn serve(listener: TcpListener, config: Config) -> std::io::Result<()> {
    let state = AppState::new(config);
    let period = (state.config().session_ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    let reaper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let dropped = reaper.reap_idle();
            if dropped > 0 {
                tracing::info!(dropped, "expired idle sessions");
            }
        }
    });
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
