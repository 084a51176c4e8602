use serde::Serialize;
use vortex_core::VortexError;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_MISSING: i32 = 4;
pub const EXIT_OTHER: i32 = 1;

/// Machine-readable failure printed as JSON on stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
    #[serde(skip)]
    pub code: i32,
}

impl CliError {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        Self {
            kind: "validation",
            field: Some(field.to_string()),
            message: message.into(),
            code: EXIT_VALIDATION,
        }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        Self {
            kind: "missing_input",
            field: None,
            message: message.into(),
            code: EXIT_MISSING,
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        Self {
            kind: "io",
            field: None,
            message: e.to_string(),
            code: EXIT_OTHER,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self, "exit_code": self.code }).to_string()
    }
}

impl From<VortexError> for CliError {
    fn from(e: VortexError) -> Self {
        let message = e.to_string();
        match e {
            VortexError::InvalidParameter { field, .. } => Self {
                kind: "validation",
                field: Some(field.to_string()),
                message,
                code: EXIT_VALIDATION,
            },
            VortexError::UnderResolved { .. } | VortexError::Overlap { .. } | VortexError::EmptyLattice { .. } => {
                Self {
                    kind: "validation",
                    field: None,
                    message,
                    code: EXIT_VALIDATION,
                }
            }
            VortexError::NoNucleation { .. } => Self {
                kind: "validation",
                field: Some("omega0".into()),
                message,
                code: EXIT_VALIDATION,
            },
            VortexError::NonConvergence { .. } => Self {
                kind: "convergence",
                field: None,
                message,
                code: EXIT_CONVERGENCE,
            },
            _ => Self {
                kind: "io",
                field: None,
                message,
                code: EXIT_OTHER,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self {
            kind: "format",
            field: None,
            message: e.to_string(),
            code: EXIT_OTHER,
        }
    }
}
