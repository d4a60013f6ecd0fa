//! Headers that open every output file.

use serde_json::json;

use crate::config::{RunConfig, UsageError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: &'static str,
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(command: &'static str, cfg: &RunConfig) -> Result<Self, UsageError> {
        Ok(Self {
            command,
            seed: cfg.get("seed")?,
            config_sha256: cfg.sha256(),
        })
    }

    /// `#` comment lines for checkpoints and CSV files.
    pub fn comment_lines(&self) -> String {
        format!(
            "# editflow {VERSION}\n# command {}\n# seed {}\n# config_sha256 {}\n",
            self.command, self.seed, self.config_sha256
        )
    }

    /// A single JSON object for newline-delimited outputs.
    pub fn json_line(&self) -> String {
        json!({
            "provenance": {
                "tool": "editflow",
                "version": VERSION,
                "command": self.command,
                "seed": self.seed,
                "config_sha256": self.config_sha256,
            }
        })
        .to_string()
            + "\n"
    }
}
