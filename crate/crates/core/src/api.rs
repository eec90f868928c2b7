//! JSON over HTTP for the editor. Handlers are plain functions from request
//! bytes to `(status, body)`; the axum layer only routes.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::Query;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value as JsonValue};

use crate::codegen::{generate_drl, generate_epl, CodegenError, Target};
use crate::document::{parse_document, parse_json, ModelDocument, ParseError, FORMAT_VERSION};
use crate::engine::{run_stream, EngineError, TimedEvent};
use crate::validator::validate;

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: JsonValue,
}

impl Reply {
    fn ok(body: JsonValue) -> Self {
        Self { status: 200, body }
    }

    fn bad_request(errors: Vec<ParseError>) -> Self {
        Self {
            status: 400,
            body: json!({ "errors": errors }),
        }
    }

    fn unprocessable(body: JsonValue) -> Self {
        Self { status: 422, body }
    }
}

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body)).into_response()
    }
}

fn body_text(body: &[u8]) -> Result<&str, Reply> {
    std::str::from_utf8(body).map_err(|e| {
        Reply::bad_request(vec![ParseError {
            line: 1,
            column: 1,
            path: String::new(),
            message: format!("body is not UTF-8: {e}"),
        }])
    })
}

fn document(body: &[u8]) -> Result<ModelDocument, Reply> {
    parse_document(body_text(body)?).map_err(Reply::bad_request)
}

pub fn validate_body(body: &[u8]) -> Reply {
    match document(body) {
        Ok(doc) => {
            let diagnostics = validate(&doc.rule);
            Reply::ok(json!({ "valid": diagnostics.is_empty(), "diagnostics": diagnostics }))
        }
        Err(r) => r,
    }
}

pub fn generate_body(target: Option<&str>, body: &[u8]) -> Reply {
    let target: Target = match target.unwrap_or("epl").parse() {
        Ok(t) => t,
        Err(message) => {
            return Reply::bad_request(vec![ParseError {
                line: 1,
                column: 1,
                path: "target".into(),
                message,
            }])
        }
    };
    let doc = match document(body) {
        Ok(doc) => doc,
        Err(r) => return r,
    };
    let generated = match target {
        Target::Epl => generate_epl(&doc.rule),
        Target::Drl => generate_drl(&doc.rule),
    };
    match generated {
        Ok(src) => Reply::ok(json!({ "target": src.target, "text": src.text })),
        Err(CodegenError::Invalid(diagnostics)) => Reply::unprocessable(json!({ "diagnostics": diagnostics })),
        Err(CodegenError::Unsupported { path, message }) => {
            Reply::unprocessable(json!({ "unsupported": { "path": path, "message": message } }))
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    model: ModelDocument,
    #[serde(default)]
    events: Vec<TimedEvent>,
}

pub fn simulate_body(body: &[u8]) -> Reply {
    let text = match body_text(body) {
        Ok(t) => t,
        Err(r) => return r,
    };
    let req: SimulateRequest = match parse_json(text) {
        Ok(r) => r,
        Err(e) => return Reply::bad_request(vec![e]),
    };
    if req.model.format_version != FORMAT_VERSION {
        return Reply::bad_request(vec![ParseError {
            line: 1,
            column: 1,
            path: "model.format_version".into(),
            message: format!(
                "unsupported format_version {:?}, expected {FORMAT_VERSION:?}",
                req.model.format_version
            ),
        }]);
    }
    match run_stream(&req.model.rule, &req.events) {
        Ok(outputs) => Reply::ok(json!({ "outputs": outputs })),
        Err(EngineError::Invalid(diagnostics)) => Reply::unprocessable(json!({ "diagnostics": diagnostics })),
        Err(EngineError::Unsupported { path, message }) => {
            Reply::unprocessable(json!({ "unsupported": { "path": path, "message": message } }))
        }
        Err(e) => Reply::unprocessable(json!({ "stream_error": e.to_string() })),
    }
}

#[derive(Deserialize)]
struct GenerateQuery {
    target: Option<String>,
}

pub fn router() -> Router {
    Router::new()
        .route("/healthz", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/api/validate", post(|body: Bytes| async move { validate_body(&body) }))
        .route(
            "/api/generate",
            post(
                |Query(q): Query<GenerateQuery>, body: Bytes| async move { generate_body(q.target.as_deref(), &body) },
            ),
        )
        .route("/api/simulate", post(|body: Bytes| async move { simulate_body(&body) }))
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router()).await
}
