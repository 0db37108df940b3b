//! Session-oriented request/response API over the engine.
//!
//! [`api::Api`] does all the work and knows nothing about sockets; [`router`]
//! and [`serve`] put it behind HTTP. Every response body, including errors,
//! is a report document.

pub mod api;
pub mod query;
pub mod session;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::net::TcpListener;

pub use api::Api;

async fn dispatch(State(api): State<Arc<Api>>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path().to_string();
    let reply = match String::from_utf8(body.to_vec()) {
        Ok(text) => {
            let api = api.clone();
            let method = method.as_str().to_string();
            tokio::task::spawn_blocking(move || api.handle(&method, &path, &text)).await
        }
        Err(_) => Ok(api::reject(method.as_str(), &path, 400, "bad_request", "request body is not UTF-8")),
    };
    match reply {
        Ok(r) => (
            StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            [(header::CONTENT_TYPE, "application/json")],
            r.body,
        )
            .into_response(),
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

pub fn router(api: Arc<Api>) -> Router {
    Router::new().fallback(dispatch).with_state(api)
}

/// Serves `api` on an already bound listener until the task is dropped.
pub async fn serve_on(listener: TcpListener, api: Arc<Api>) -> std::io::Result<()> {
    axum::serve(listener, router(api)).await
}

/// Binds `addr` (for example `127.0.0.1:8787`) and serves until interrupted.
pub async fn serve(addr: &str, api: Arc<Api>) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    serve_on(listener, api).await
}

/// [`serve`] on a fresh multi-threaded runtime, blocking the caller.
pub fn serve_blocking(addr: &str, api: Api) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, Arc::new(api)))
}
