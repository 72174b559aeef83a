use axum::extract::multipart::MultipartError;
use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use imgjournal_core::replay::ExecError;
use imgjournal_core::{CodecError, JournalError, OpError, ReplayError, SessionError};
use serde::Serialize;

/// An error response. Serialized as `{code, message, seq?, line?}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            seq: None,
            line: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "SchemaError", message)
    }

    pub fn session_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "SessionNotFound", format!("no session {id}"))
    }

    fn with_seq(mut self, seq: Option<u64>) -> Self {
        self.seq = seq;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        } else {
            tracing::debug!(code = self.code, status = %self.status, "{}", self.message);
        }
        (self.status, Json(self)).into_response()
    }
}

impl From<OpError> for ApiError {
    fn from(e: OpError) -> Self {
        let code = match e {
            OpError::OutOfBounds { .. } => "OutOfBounds",
            OpError::InvalidAngle(_) => "InvalidAngle",
            OpError::ParamOutOfRange { .. } => "ParamOutOfRange",
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

impl From<ExecError> for ApiError {
    fn from(e: ExecError) -> Self {
        let message = e.to_string();
        match e {
            ExecError::Op(op) => op.into(),
            ExecError::MissingInsert(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "MissingInsert", message)
            }
            ExecError::NothingToUndo => Self::new(StatusCode::CONFLICT, "NothingToUndo", message),
            ExecError::NothingToRedo => Self::new(StatusCode::CONFLICT, "NothingToRedo", message),
            ExecError::NotAnEdit(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "NotAnEdit", message),
        }
    }
}

impl From<CodecError> for ApiError {
    fn from(e: CodecError) -> Self {
        let (status, code) = match e {
            CodecError::UnsupportedFormat(_) => (StatusCode::BAD_REQUEST, "UnsupportedFormat"),
            CodecError::CorruptFile { .. } => (StatusCode::BAD_REQUEST, "CorruptFile"),
            CodecError::FormatMismatch { .. } => (StatusCode::BAD_REQUEST, "FormatMismatch"),
            CodecError::QualityOutOfRange(_) => (StatusCode::UNPROCESSABLE_ENTITY, "QualityOutOfRange"),
            CodecError::EncodeError { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "EncodeError"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<JournalError> for ApiError {
    fn from(e: JournalError) -> Self {
        let seq = match e {
            JournalError::Schema { seq, .. } | JournalError::DuplicateImport { seq, .. } => Some(seq),
            _ => None,
        };
        let mut err = Self::new(StatusCode::BAD_REQUEST, "ParseError", e.to_string()).with_seq(seq);
        err.line = e.line();
        err
    }
}

impl From<ReplayError> for ApiError {
    fn from(e: ReplayError) -> Self {
        match e {
            ReplayError::SourceMismatch { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "SourceMismatch", e.to_string())
            }
            ReplayError::Execution { seq, ref source, .. } => {
                let mut err = ApiError::from(source.clone()).with_seq(Some(seq));
                err.message = e.to_string();
                if err.status == StatusCode::CONFLICT {
                    err.status = StatusCode::UNPROCESSABLE_ENTITY;
                }
                err
            }
            ReplayError::IndexOutOfRange { .. } => {
                Self::new(StatusCode::NOT_FOUND, "StateOutOfRange", e.to_string())
            }
            ReplayError::Journal(j) => j.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Exec(e) => e.into(),
            SessionError::Codec(e) => e.into(),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", other.to_string()),
        }
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        let status = e.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "PayloadTooLarge"
        } else {
            "BadRequest"
        };
        Self::new(status, code, e.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        let status = e.status();
        let code = match status {
            StatusCode::PAYLOAD_TOO_LARGE => "PayloadTooLarge",
            StatusCode::UNPROCESSABLE_ENTITY => "SchemaError",
            _ => "BadRequest",
        };
        Self::new(status, code, e.body_text())
    }
}
