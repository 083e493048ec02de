use serde_json::{json, Value};
use thiserror::Error;

/// Failures surfaced by the command-line tool, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path:?}: {message}")]
    Config { path: String, message: String },

    #[error("config error at {path:?}: parse error at byte {offset}: {message}")]
    ConfigParse {
        path: String,
        offset: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] finsler_core::Error),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("cannot write output: {0}")]
    Output(String),
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REGULARITY: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;
pub const EXIT_OTHER: i32 = 1;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use finsler_core::Error as E;
        match self {
            CliError::Config { .. } | CliError::ConfigParse { .. } => EXIT_CONFIG,
            CliError::Core(E::Argument(_) | E::Parse { .. }) => EXIT_CONFIG,
            CliError::Core(_) => EXIT_REGULARITY,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Output(_) => EXIT_OTHER,
        }
    }

    fn kind(&self) -> &'static str {
        use finsler_core::Error as E;
        match self {
            CliError::Config { .. } | CliError::ConfigParse { .. } => "config",
            CliError::Core(e) => match e {
                E::Evaluation { .. } => "evaluation",
                E::Argument(_) => "argument",
                E::Parse { .. } => "parse",
                E::Regularity(_) => "regularity",
                E::Domain(_) => "domain",
                E::DegenerateFlag => "degenerate_flag",
                E::Integration { .. } => "integration",
                E::Arithmetic(_) => "arithmetic",
            },
            CliError::Verification(_) => "verification",
            CliError::Output(_) => "output",
        }
    }

    /// Structured form written to standard error.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        });
        let e = &mut v["error"];
        match self {
            CliError::Config { path, .. } => e["path"] = json!(path),
            CliError::ConfigParse { path, offset, .. } => {
                e["path"] = json!(path);
                e["offset"] = json!(offset);
            }
            CliError::Core(finsler_core::Error::Integration { t_last, .. }) => e["t_last"] = json!(t_last),
            _ => {}
        }
        v
    }
}
