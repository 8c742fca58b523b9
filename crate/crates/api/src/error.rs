use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use simworks_core::bundle::BundleError;
use simworks_core::executor::ExecutorError;
use simworks_core::model::ValidationReport;
use simworks_core::registry::RegistryError;
use simworks_core::templates::TemplateError;
use simworks_core::workspace::WorkspaceError;

use crate::canonical_response;

/// The body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offending_field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        ApiError {
            http_status: status.as_u16(),
            code: code.to_owned(),
            detail: detail.into(),
            offending_field: None,
        }
    }

    pub fn field(mut self, field: impl Into<String>) -> Self {
        self.offending_field = Some(field.into());
        self
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", what)
    }

    pub fn unauthorized() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "UNAUTHORIZED", "missing or invalid bearer token")
    }

    pub fn bad_request(code: &str, detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, detail)
    }

    pub fn unprocessable(code: &str, detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, detail)
    }

    /// Hides the cause behind an incident id that is also written to stderr.
    pub fn internal(cause: impl std::fmt::Display) -> Self {
        let incident = uuid::Uuid::new_v4().simple().to_string();
        eprintln!("incident {incident}: {cause}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", format!("incident {incident}"))
    }

    /// First violation of a failed report; node-level violations name the node.
    pub fn from_report(report: &ValidationReport) -> Self {
        let Some(v) = report.violations.first() else {
            return ApiError::internal("empty failing report");
        };
        let field = match (&v.node_id, &v.field) {
            (Some(n), Some(f)) => Some(format!("pipeline.nodes[{n}].{f}")),
            (Some(n), None) => Some(format!("pipeline.nodes[{n}]")),
            (None, f) => f.clone(),
        };
        let detail = if report.violations.len() > 1 {
            format!("{} (and {} more violations)", v.detail, report.violations.len() - 1)
        } else {
            v.detail.clone()
        };
        ApiError {
            http_status: StatusCode::UNPROCESSABLE_ENTITY.as_u16(),
            code: v.code.clone(),
            detail,
            offending_field: field,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        canonical_response(status, &self)
    }
}

impl From<TemplateError> for ApiError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()),
            TemplateError::Io(_) => ApiError::internal(e),
            _ => ApiError::unprocessable(e.code(), e.to_string()),
        }
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::CommitNotFound(_) => ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()),
            RegistryError::ConcurrentHead { .. } => ApiError::new(StatusCode::CONFLICT, e.code(), e.to_string()),
            RegistryError::Io(_) | RegistryError::Corrupt(_) => ApiError::internal(e),
            _ => ApiError::unprocessable(e.code(), e.to_string()),
        }
    }
}

impl From<BundleError> for ApiError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io(_) | BundleError::StoreIo(_) => ApiError::internal(e),
            BundleError::Parse(_) => ApiError::bad_request(e.code(), e.to_string()),
            _ => ApiError::unprocessable(e.code(), e.to_string()),
        }
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        match e {
            WorkspaceError::Template(e) => e.into(),
            WorkspaceError::Registry(e) => e.into(),
            WorkspaceError::Bundle(e) => e.into(),
            WorkspaceError::Io(e) => ApiError::internal(e),
        }
    }
}

impl From<ExecutorError> for ApiError {
    fn from(e: ExecutorError) -> Self {
        match e {
            ExecutorError::RunNotFound(id) => ApiError::not_found(format!("run {id}")),
            _ => ApiError::internal(e),
        }
    }
}
