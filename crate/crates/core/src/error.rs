use std::path::PathBuf;

use serde::Serialize;

/// One step of subgroup relaxation, recorded for auditability.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RelaxationStep {
    pub step: usize,
    pub action: String,
    /// Members inside the (relaxed) window after this step.
    pub in_window: usize,
}

/// Pipeline stage that raised an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Population,
    Matching,
    Sociology,
    Utility,
    Forecast,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Population => "population",
            Stage::Matching => "matching",
            Stage::Sociology => "sociology",
            Stage::Utility => "utility",
            Stage::Forecast => "forecast",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}: row {row}, field `{field}`: {message}")]
    Ingestion {
        source_name: String,
        row: usize,
        field: String,
        message: String,
    },

    #[error("invalid `{field_path}`: {message}")]
    Validation { field_path: String, message: String },

    #[error("insufficient data in {stage} stage for `{subject}`: {message}")]
    InsufficientData {
        stage: Stage,
        subject: String,
        message: String,
        relaxation_log: Vec<RelaxationStep>,
    },
}

impl Error {
    pub fn validation(field_path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field_path: field_path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn insufficient(
        stage: Stage,
        subject: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::InsufficientData {
            stage,
            subject: subject.into(),
            message: message.into(),
            relaxation_log: Vec::new(),
        }
    }

    /// Prefixes the field path of a validation error, e.g. `groups[1].` + `rate`.
    pub fn with_path_prefix(self, prefix: &str) -> Self {
        match self {
            Error::Validation {
                field_path,
                message,
            } => {
                let field_path = if field_path.is_empty() {
                    prefix.to_string()
                } else if field_path.starts_with('[') {
                    format!("{prefix}{field_path}")
                } else {
                    format!("{prefix}.{field_path}")
                };
                Error::Validation {
                    field_path,
                    message,
                }
            }
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
