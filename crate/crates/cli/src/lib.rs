//! Scenario loading, run orchestration and report writing for the `cz`
//! command-line tool.

pub mod report;
pub mod run;
pub mod scenario;

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};

/// Shipped scenarios, used when `CZ_FIXTURE_DIR` is unset.
pub const DEFAULT_FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");

/// Resolves a scenario argument: an existing path, or a name looked up in
/// the fixture directory (with or without `.toml`).
pub fn resolve_scenario(arg: &str, fixture_dir: &Path) -> Result<PathBuf> {
    let direct = PathBuf::from(arg);
    if direct.is_file() {
        return Ok(direct);
    }
    for candidate in [fixture_dir.join(arg), fixture_dir.join(format!("{arg}.toml"))] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    let mut known: Vec<String> = std::fs::read_dir(fixture_dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter_map(|e| e.path().file_stem().map(|s| s.to_string_lossy().into_owned()))
                .collect()
        })
        .unwrap_or_default();
    known.sort();
    bail!(
        "no scenario '{arg}' (not a file, and not found in {}; available: {})",
        fixture_dir.display(),
        if known.is_empty() { "none".to_string() } else { known.join(", ") }
    )
}
