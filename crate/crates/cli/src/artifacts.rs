//! Writing outputs that carry the config hash.

use crate::error::{CliError, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

pub const HASH_PREFIX: &str = "# config_hash = ";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

/// CSV whose first line is a `# config_hash = "..."` comment.
pub fn write_csv(path: &Path, hash: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{HASH_PREFIX}\"{hash}\"")?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Hash from a leading `# config_hash = "..."` line, if any.
pub fn hash_from_comment(text: &str) -> Option<String> {
    let rest = text.lines().next()?.strip_prefix(HASH_PREFIX)?;
    Some(rest.trim().trim_matches('"').to_string())
}
