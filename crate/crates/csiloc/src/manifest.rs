//! Append-only run manifest: one line per completed stage recording what
//! ran, under which configuration hash and seed, and for how long.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

use crate::config::RunConfig;

/// FNV-1a over the canonical configuration text. Stable across runs and
/// platforms, which is all a manifest needs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Append one stage record. The manifest grows monotonically, so it is
/// exempt from overwrite protection and from byte-identity comparisons.
pub fn append(path: &Path, command: &str, config: &RunConfig, wall: Duration) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let line = format!(
        "{stamp} {command} seed={} config={:016x} wall_ms={}\n",
        config.seed,
        fnv1a(config.normalized().as_bytes()),
        wall.as_millis()
    );
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening manifest {}", path.display()))?;
    file.write_all(line.as_bytes())?;
    Ok(())
}
