//! The metadata line at the top of every output file.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Result, ToolError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `# pivots <version> config=<json> hash=<16 hex digits>`, where the hash
/// covers the JSON text.
pub fn metadata_line<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("configs serialize");
    let digest = Sha256::digest(json.as_bytes());
    let hash: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("# pivots {VERSION} config={json} hash={hash}")
}

/// The JSON config recorded in a metadata line.
pub fn parse_metadata_line(line: &str) -> Result<serde_json::Value> {
    let rest = line
        .strip_prefix("# pivots ")
        .ok_or_else(|| ToolError::format("missing metadata line"))?;
    let start = rest
        .find(" config=")
        .ok_or_else(|| ToolError::format("metadata line without config"))?;
    let end = rest
        .rfind(" hash=")
        .ok_or_else(|| ToolError::format("metadata line without hash"))?;
    serde_json::from_str(&rest[start + 8..end])
        .map_err(|e| ToolError::format(format!("metadata config: {e}")))
}
