use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Body of every non-2xx response.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    /// Prefixes the message with the file it came from.
    pub fn context(mut self, path: &std::path::Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("{what} {id:?} does not exist"),
        )
    }

    pub fn training_in_progress(id: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "training_in_progress",
            format!("model {id:?} is training; retry when it is idle"),
        )
    }

    /// Maps a library error onto a 400, prefixing its field path with `prefix`.
    pub fn from_lib(err: gridnet::Error, prefix: &str) -> Self {
        let field = err.field_path().map(|p| {
            if prefix.is_empty() {
                p.0.clone()
            } else if p.0.is_empty() {
                prefix.to_owned()
            } else {
                format!("{prefix}.{}", p.0)
            }
        });
        let code = match &err {
            gridnet::Error::Config { .. } => "invalid_config",
            gridnet::Error::Load { .. } | gridnet::Error::Version { .. } => "invalid_document",
            gridnet::Error::Render(_) => "render_error",
            gridnet::Error::Io { .. } => "io_error",
            _ => "invalid_argument",
        };
        let status = match &err {
            gridnet::Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            code,
            message: err.to_string(),
            field,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} ({}): {}",
            self.status.as_u16(),
            self.code,
            self.message
        )
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body<'a> {
            status: u16,
            #[serde(flatten)]
            error: &'a ApiError,
        }
        let status = self.status;
        (
            status,
            Json(Body {
                status: status.as_u16(),
                error: &self,
            }),
        )
            .into_response()
    }
}

fn schema_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> ApiError {
    let path = e.path().to_string();
    let err = ApiError::new(
        StatusCode::BAD_REQUEST,
        "invalid_body",
        e.into_inner().to_string(),
    );
    if path == "." {
        err
    } else {
        err.with_field(path)
    }
}

/// Parses a JSON body, reporting the failing field path on schema errors.
pub fn parse_body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(schema_error)
}

/// Same as [`parse_body`] for an already parsed value.
pub fn parse_value<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
) -> Result<T, ApiError> {
    serde_path_to_error::deserialize(value).map_err(schema_error)
}
