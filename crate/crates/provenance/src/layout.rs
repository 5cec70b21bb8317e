use super::{io_err, Result};
use std::fs;
use std::path::{Path, PathBuf};

/// The ten directories every experiment has, created up front.
pub const LEAF_DIRS: [&str; 10] =
    ["data", "logs/ml", "logs/fi", "plots/data", "plots/ml", "plots/fi", "models", "results/ml", "results/fi", "options"];

pub const RAW_DATA: &str = "data/raw.csv";
pub const RAW_DIGEST: &str = "data/raw.csv.sha256";
pub const PREPROCESSED_DATA: &str = "data/preprocessed.csv";
pub const PIPELINE: &str = "models/pipeline.json";
pub const LOCK_FILE: &str = ".lock";

/// `$HELIXFORGE_HOME`, else `~/HelixForgeExperiments`.
pub fn workspace_root() -> PathBuf {
    if let Some(p) = std::env::var_os("HELIXFORGE_HOME") {
        return PathBuf::from(p);
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    home.join("HelixForgeExperiments")
}

pub fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Write to a sibling temp file then rename, so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("artifact paths have a parent");
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path.file_name().expect("artifact paths name a file").to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Files under `dir`, as sorted paths relative to `dir`, skipping temp files.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        if !dir.exists() {
            return Ok(());
        }
        for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
            let entry = entry.map_err(|e| io_err(dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else if !entry.file_name().to_string_lossy().ends_with(".tmp") {
                out.push(path.strip_prefix(base).expect("walk stays under base").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Safe file stem for column or model names.
pub fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}
