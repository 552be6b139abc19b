use axum::extract::rejection::JsonRejection;
use axum::extract::FromRequest;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cuiwb_core::corpus::{Annotation, CorpusError, LintFinding};
use serde_json::{json, Value};

use crate::store::StoreError;

/// An error response: a status code and a JSON body with at least an
/// `error` message.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.to_string() }),
        }
    }

    pub fn bad_request(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    /// Map a store failure for a request that wrote `ann`, reporting
    /// offset and label rejections as lint findings.
    pub fn from_store(err: StoreError, ann: Option<&Annotation>) -> Self {
        let finding = match (&err, ann) {
            (StoreError::Corpus(e), Some(a)) => LintFinding::from_rejection(a, e),
            _ => None,
        };
        if let Some(finding) = finding {
            return ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": err.to_string(), "findings": [finding] }),
            };
        }
        let status = match &err {
            StoreError::UnknownDocument(_) | StoreError::UnknownAnnotation(_) => StatusCode::NOT_FOUND,
            StoreError::DocumentChange { .. } => StatusCode::BAD_REQUEST,
            StoreError::Corpus(e) => match e {
                CorpusError::UnknownDocument(_) | CorpusError::UnknownAnnotation(_) => StatusCode::NOT_FOUND,
                CorpusError::DuplicateDocument(_)
                | CorpusError::DuplicateAnnotation(_)
                | CorpusError::InvalidTransition { .. } => StatusCode::CONFLICT,
                CorpusError::InvalidOffsets { .. } | CorpusError::EmptyLabel => StatusCode::UNPROCESSABLE_ENTITY,
                CorpusError::InvalidId(_) => StatusCode::BAD_REQUEST,
            },
            StoreError::Corrupt { .. } | StoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, err)
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        Self::from_store(err, None)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// JSON body extractor whose rejections are 400s, keeping 422 for lint
/// findings.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct JsonBody<T>(pub T);

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::bad_request(rejection.body_text())
    }
}
