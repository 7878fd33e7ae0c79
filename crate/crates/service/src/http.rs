use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

use crate::{RatingRequest, ServiceError, SessionStore};

#[derive(Serialize)]
struct ErrorBody {
    error_code: &'static str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error_code: self.code(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Deserialize)]
struct CreateBody {
    agenda_id: String,
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

/// Runs blocking store work (locks and fsync) off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create_session(State(store): State<Arc<SessionStore>>, body: Bytes) -> Result<Response, ServiceError> {
    let req: CreateBody = parse_body(&body)?;
    let view = blocking(move || store.create_session(&req.agenda_id)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn post_message(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let req: MessageBody = parse_body(&body)?;
    let view = blocking(move || store.post_message(&id, &req.text)).await?;
    Ok(Json(view).into_response())
}

async fn post_rating(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let req: RatingRequest = parse_body(&body)?;
    let ack = blocking(move || store.post_rating(&id, &req)).await?;
    Ok(Json(ack).into_response())
}

async fn get_transcript(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let view = blocking(move || store.transcript(&id)).await?;
    Ok(Json(view).into_response())
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/ratings", post(post_rating))
        .route("/api/sessions/{id}/transcript", get(get_transcript))
        .layer(CorsLayer::permissive())
        .with_state(store)
}

pub async fn serve(listener: TcpListener, store: Arc<SessionStore>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
