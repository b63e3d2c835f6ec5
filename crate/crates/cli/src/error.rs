use serde::Serialize;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status when a self-test finds an oracle mismatch.
pub const EXIT_NUMERICAL: i32 = 1;
/// Exit status for invalid configuration or input.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip)]
    pub status: i32,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: "config", message: message.into(), status: EXIT_CONFIG }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { kind: "io", message: message.into(), status: EXIT_CONFIG }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { kind: "numerical", message: message.into(), status: EXIT_NUMERICAL }
    }

    /// One-line JSON for the diagnostic stream.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<thermorev::Error> for CliError {
    fn from(e: thermorev::Error) -> Self {
        // library errors come from invalid inputs
        CliError { kind: "input", message: e.to_string(), status: EXIT_CONFIG }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}
