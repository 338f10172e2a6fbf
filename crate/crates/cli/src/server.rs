//! HTTP binding of the annotation service.
//!
//! | method | path                        | success                          |
//! |--------|-----------------------------|----------------------------------|
//! | GET    | `/tasks/next?annotator=ID`  | 200 `{"task": AnnotationTask \| null}` |
//! | GET    | `/media/{post_id}`          | 200 image bytes                  |
//! | POST   | `/annotations`              | 201 stored `Annotation`          |
//! | GET    | `/progress`                 | 200 `Progress`                   |
//!
//! Failures are `{"error": {"code": "...", "message": "..."}}` with 400
//! (malformed request), 404 (unknown post or media) or 422 (invalid label).

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reactlens::annotate::{AnnotationRequest, AnnotationService, ApiError, ApiErrorKind};
use serde::Deserialize;
use serde_json::json;

type Shared = Arc<AnnotationService>;

struct Failure {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let status = match e.kind {
            ApiErrorKind::NotFound => StatusCode::NOT_FOUND,
            ApiErrorKind::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ApiErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Failure {
            status,
            code: e.code,
            message: e.message,
        }
    }
}

impl Failure {
    fn bad_request(message: impl Into<String>) -> Self {
        Failure {
            status: StatusCode::BAD_REQUEST,
            code: "malformed_request",
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: message.into(),
        }
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

async fn next_task(
    State(svc): State<Shared>,
    query: Result<Query<NextQuery>, QueryRejection>,
) -> Result<Response, Failure> {
    let Query(q) = query.map_err(|e| Failure::bad_request(e.body_text()))?;
    let annotator = q.annotator.unwrap_or_default();
    let task = svc.next_task(&annotator)?;
    Ok(Json(json!({ "task": task })).into_response())
}

async fn media(State(svc): State<Shared>, Path(post_id): Path<String>) -> Result<Response, Failure> {
    let body = tokio::task::spawn_blocking(move || svc.media(&post_id))
        .await
        .map_err(|e| Failure::internal(e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, body.content_type)], body.bytes).into_response())
}

async fn submit(
    State(svc): State<Shared>,
    body: Result<Json<AnnotationRequest>, JsonRejection>,
) -> Result<Response, Failure> {
    let Json(request) = body.map_err(|e| Failure::bad_request(e.body_text()))?;
    let stored = tokio::task::spawn_blocking(move || svc.submit(request, unix_now))
        .await
        .map_err(|e| Failure::internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

async fn progress(State(svc): State<Shared>) -> Response {
    Json(svc.progress()).into_response()
}

fn unix_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

pub fn router(service: AnnotationService) -> Router {
    Router::new()
        .route("/tasks/next", get(next_task))
        .route("/media/{post_id}", get(media))
        .route("/annotations", post(submit))
        .route("/progress", get(progress))
        .fallback(|| async {
            Failure {
                status: StatusCode::NOT_FOUND,
                code: "no_route",
                message: "unknown endpoint".into(),
            }
        })
        .with_state(Arc::new(service))
}

pub async fn serve(service: AnnotationService, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation API listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service)).await?;
    Ok(())
}
