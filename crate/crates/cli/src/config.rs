use std::path::Path;

use anyhow::Context;
use spectree_core::{Error, SessionConfig};

/// Session settings from `--config`, or the defaults.
pub fn load(path: Option<&Path>) -> anyhow::Result<SessionConfig> {
    let Some(path) = path else {
        return Ok(SessionConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })?;
    let config: SessionConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Parse {
            format: "config",
            message: e.to_string(),
        })
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(config)
}

/// Replace `slot` when a flag was given.
pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
