//! HTTP hosting for interview sessions.
//!
//! Routes (JSON bodies):
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/api/sessions` | `{agenda_id}` |
//! | POST | `/api/sessions/{id}/messages` | `{text}` |
//! | POST | `/api/sessions/{id}/ratings` | `{topic_id?, final?, score}` |
//! | GET | `/api/sessions/{id}/transcript` | |
//!
//! Errors come back as `{error_code, message}`.

mod http;
mod store;

use axum::http::StatusCode;
use thiserror::Error;

pub use http::{router, serve};
pub use store::{Clock, RatingAck, RatingRequest, SessionStore, SkippedLog, SystemClock, TranscriptView, TurnView};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown agenda {0:?}")]
    UnknownAgenda(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("the interview is already finished")]
    SessionDone,
    #[error("message is empty")]
    EmptyMessage,
    #[error("score {0} is outside 1-5")]
    ScoreOutOfRange(i64),
    #[error("topic {0:?} has not been asked yet")]
    TopicNotYetAsked(String),
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("storage error: {0}")]
    Storage(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownAgenda(_) => "UNKNOWN_AGENDA",
            Self::UnknownSession(_) => "UNKNOWN_SESSION",
            Self::SessionDone => "SESSION_DONE",
            Self::EmptyMessage => "EMPTY_MESSAGE",
            Self::ScoreOutOfRange(_) => "SCORE_OUT_OF_RANGE",
            Self::TopicNotYetAsked(_) => "TOPIC_NOT_YET_ASKED",
            Self::UnknownTopic(_) => "UNKNOWN_TOPIC",
            Self::BadRequest(_) => "BAD_REQUEST",
            Self::Storage(_) => "STORAGE",
            Self::Internal(_) => "INTERNAL",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::UnknownAgenda(_) | Self::UnknownSession(_) => StatusCode::NOT_FOUND,
            Self::SessionDone | Self::TopicNotYetAsked(_) => StatusCode::CONFLICT,
            Self::EmptyMessage | Self::ScoreOutOfRange(_) | Self::UnknownTopic(_) | Self::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            Self::Storage(_) | Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}
