use polarfield::mesh::MeshError;
use polarfield::prescribe::PrescriptionError;
use polarfield::solve::{AlignError, SolveError};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Error printed as one JSON object; `code` becomes the process exit status.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: i32,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl CliError {
    pub fn new(code: i32, error: &str, message: impl Into<String>) -> Self {
        CliError { code, error: error.into(), message: message.into(), stage: None, detail: Value::Null }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::new(EXIT_IO, "IoError", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("error serializes")
    }
}

pub fn mesh_error(path: &Path, e: MeshError) -> CliError {
    let name = match &e {
        MeshError::Io(_) => return CliError::io(path, e),
        MeshError::ParseError { .. } => "ParseError",
        MeshError::NonManifold(_) => "NonManifold",
        MeshError::NonTriangular { .. } => "NonTriangular",
        MeshError::DegenerateFace(_) => "DegenerateFace",
        MeshError::BoundaryEdge(_) => "BoundaryEdge",
        MeshError::BoundaryVertex(_) => "BoundaryVertex",
    };
    CliError::new(EXIT_VALIDATION, name, e.to_string())
}

impl From<PrescriptionError> for CliError {
    fn from(e: PrescriptionError) -> Self {
        let mut err = CliError::new(EXIT_VALIDATION, e.name(), e.to_string());
        if let PrescriptionError::IndexSumMismatch { sum, chi } = e {
            err.detail = json!({ "chi": chi, "sum": sum });
        }
        err
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        SolveError::Alignment(e).into()
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        if let SolveError::Prescription(p) = e {
            return p.into();
        }
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_SOLVER };
        let mut err = CliError::new(code, e.name(), e.to_string());
        err.stage = Some(e.stage().into());
        err
    }
}
