//! HTTP API used by the annotation front end.
//!
//! - `GET /api/next?annotator=<id>`: next blind triple, or `{"done": true}`
//! - `POST /api/judgments`: `{job_id, annotator, verdict, permutation?}`
//! - `GET /api/progress`: job counts by status
//! - `GET /api/export`: accepted records as JSON lines

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::export::write_records;
use super::job::Verdict;
use super::pipeline::Pipeline;
use crate::error::Error;

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: String,
}

#[derive(Debug, Deserialize)]
struct JudgmentBody {
    job_id: u64,
    annotator: String,
    verdict: Verdict,
    #[serde(default)]
    permutation: Option<String>,
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownAnnotator(_) => StatusCode::UNAUTHORIZED,
            Error::JobNotFound(_) => StatusCode::NOT_FOUND,
            Error::JobFinalized(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

async fn next(State(p): State<Arc<Pipeline>>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    Ok(match p.next_item(&q.annotator)? {
        Some(item) => Json(json!({
            "done": false,
            "job_id": item.job_id,
            "sentences": item.sentences,
            "permutation": item.permutation,
        }))
        .into_response(),
        None => Json(json!({ "done": true })).into_response(),
    })
}

async fn judgments(State(p): State<Arc<Pipeline>>, Json(body): Json<JudgmentBody>) -> Result<Response, ApiError> {
    // The journal fsync blocks; keep it off the async workers.
    let status = tokio::task::spawn_blocking(move || {
        p.record_judgment(body.job_id, &body.annotator, body.verdict, body.permutation)
            .map(|s| (body.job_id, s))
    })
    .await
    .map_err(|e| Error::Config(format!("judgment task failed: {e}")))??;
    Ok(Json(json!({ "job_id": status.0, "status": status.1 })).into_response())
}

async fn progress(State(p): State<Arc<Pipeline>>) -> Json<super::pipeline::Progress> {
    Json(p.progress())
}

async fn export(State(p): State<Arc<Pipeline>>) -> Result<Response, ApiError> {
    let mut body = Vec::new();
    write_records(&mut body, &p.accepted_records()).map_err(|e| Error::io(p.dir(), e))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/api/next", get(next))
        .route("/api/judgments", post(judgments))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .with_state(pipeline)
}

pub async fn bind(addr: SocketAddr) -> crate::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))
}

/// Serve on an already bound listener until ctrl-c.
pub async fn serve_on(pipeline: Arc<Pipeline>, listener: tokio::net::TcpListener) -> crate::Result<()> {
    if let Ok(local) = listener.local_addr() {
        tracing::info!(%local, "annotation API listening");
    }
    axum::serve(listener, router(pipeline))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Config(format!("server error: {e}")))
}

/// Bind `addr` and serve until ctrl-c.
pub async fn serve(pipeline: Arc<Pipeline>, addr: SocketAddr) -> crate::Result<()> {
    serve_on(pipeline, bind(addr).await?).await
}
