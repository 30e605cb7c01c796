//! The `render` subcommand: turn saved trajectory logs back into SVG
//! renderings. A complete log reproduces the bytes the original `run`
//! wrote; a truncated log still renders, with a warning, from whatever
//! prefix survived.

use std::path::{Path, PathBuf};

use dualnav_core::export::{episode_svg, write_atomic};
use dualnav_core::trajectory::load_jsonl;

use crate::CliError;

fn log_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let meta = std::fs::metadata(path)
        .map_err(|source| CliError::Path { path: path.to_path_buf(), source })?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|source| CliError::Path { path: path.to_path_buf(), source })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::NoLogs(path.to_path_buf()));
    }
    Ok(files)
}

pub fn execute(log: &Path, out: &Path) -> Result<(), CliError> {
    let files = log_files(log)?;
    std::fs::create_dir_all(out)?;
    for file in files {
        let parsed = load_jsonl(&file)
            .map_err(|source| CliError::Log { path: file.clone(), source })?;
        if parsed.result.is_none() {
            eprintln!(
                "warning: {} is truncated; rendering the partial trace over the ground-truth map",
                file.display()
            );
        }
        let svg = episode_svg(&parsed)?;
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trajectory".into());
        let target = out.join(format!("{stem}.svg"));
        write_atomic(&target, svg.as_bytes())?;
        println!("rendered {}", target.display());
    }
    Ok(())
}
