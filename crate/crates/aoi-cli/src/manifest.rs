//! Run manifests: every output embeds the invocation that produced it.

use serde::Serialize;

/// Invocation header attached to every output, as a JSON sibling object or
/// as `#` comment lines in CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// Unix seconds taken from SOURCE_DATE_EPOCH, or empty when unset.
    /// Wall-clock time is never read, so reruns stay byte-identical.
    pub timestamp: String,
    pub format: String,
    /// Resolved parameter echo, one entry per effective flag.
    pub parameters: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &str, format: &str, parameters: serde_json::Value) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").unwrap_or_default(),
            format: format.into(),
            parameters,
        }
    }

    /// Comment-line rendering for CSV outputs. Parameter keys are sorted
    /// (serde_json maps are ordered), keeping the header deterministic.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# subcommand: {}", self.subcommand),
            format!("# version: {}", self.version),
            format!("# timestamp: {}", self.timestamp),
            format!("# format: {}", self.format),
        ];
        if let serde_json::Value::Object(map) = &self.parameters {
            for (key, value) in map {
                lines.push(format!("# {key}: {value}"));
            }
        }
        lines
    }
}
