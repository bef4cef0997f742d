//! HTTP API over gridnet: datasets, models, streamed training, prediction
//! with activation heatmaps, and rendered figures.
//!
//! Every non-2xx response carries an [`ApiError`] body. Training streams
//! server-sent events: one `epoch` event per epoch, then a `summary`.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use axum::http::{header, HeaderValue, Method};
use axum::Router;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

mod error;
mod routes;
mod state;

pub use error::ApiError;
pub use routes::{router, DatasetCreated, ModelInfo, PredictResponse, TrainSummary};
pub use state::{default_class_names, AppState, ModelSession, SessionStatus};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub host: IpAddr,
    pub port: u16,
    pub state_dir: Option<PathBuf>,
    pub cors_origin: Option<String>,
    /// Directory of static assets (the browser UI) served outside `/api`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            state_dir: None,
            cors_origin: None,
            static_dir: None,
        }
    }
}

/// Builds the full application: API routes, fallback, CORS and static files.
pub fn app(opts: &ServeOptions) -> Result<Router, ApiError> {
    let state = match &opts.state_dir {
        Some(dir) => AppState::with_state_dir(dir)?,
        None => AppState::new(),
    };
    let mut app = router(state);
    app = match &opts.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(routes::not_found),
    };
    if let Some(origin) = &opts.cors_origin {
        let allow = if origin == "*" {
            AllowOrigin::any()
        } else {
            let value = HeaderValue::from_str(origin)
                .map_err(|_| ApiError::bad_request(format!("invalid CORS origin {origin:?}")))?;
            AllowOrigin::exact(value)
        };
        app = app.layer(
            CorsLayer::new()
                .allow_origin(allow)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

/// Binds and serves until the process is stopped.
pub async fn serve(opts: ServeOptions) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let app = app(&opts)?;
    let addr = SocketAddr::new(opts.host, opts.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
