//! Scenario discovery: a `--scenario` argument may name one JSON file or a
//! directory of them. Directory loads are sorted by file name so episode
//! order, and with it every output file, is stable across runs.

use std::path::{Path, PathBuf};

use dualnav_core::world::{load_scenario, EpisodeSpec, ScenarioError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioSetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario {path} is not valid: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: ScenarioError,
    },
    #[error("no .json scenario files under {0}")]
    Empty(PathBuf),
}

/// File stem reduced to safe output-name characters.
fn stem_of(path: &Path) -> String {
    let raw = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    let cleaned: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '-' })
        .collect();
    if cleaned.is_empty() {
        "scenario".to_string()
    } else {
        cleaned
    }
}

fn load_one(path: &Path) -> Result<(String, EpisodeSpec), ScenarioSetError> {
    let spec = load_scenario(path)
        .map_err(|source| ScenarioSetError::Invalid { path: path.to_path_buf(), source })?;
    Ok((stem_of(path), spec))
}

/// Loads a single scenario file or every `.json` file in a directory.
pub fn load_set(path: &Path) -> Result<Vec<(String, EpisodeSpec)>, ScenarioSetError> {
    let meta = std::fs::metadata(path)
        .map_err(|source| ScenarioSetError::Io { path: path.to_path_buf(), source })?;
    if meta.is_file() {
        return Ok(vec![load_one(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|source| ScenarioSetError::Io { path: path.to_path_buf(), source })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ScenarioSetError::Empty(path.to_path_buf()));
    }
    files.iter().map(|p| load_one(p)).collect()
}
