//! Output directory handling: relative-path checks, atomic writes and the run
//! manifest.

use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::fail::{CliError, CliResult};

pub const OUTPUT_DIR_ENV: &str = "MFSPREAD_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "mfspread-out";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Rejects absolute paths and any `..` component.
pub fn check_relative(path: &Path) -> CliResult<()> {
    if path.is_absolute() || path.has_root() {
        return Err(CliError::usage(format!(
            "output path `{}` must be relative to --output-dir",
            path.display()
        )));
    }
    if path.components().any(|c| matches!(c, Component::ParentDir | Component::Prefix(_))) {
        return Err(CliError::usage(format!(
            "output path `{}` must not leave --output-dir",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Writes below one directory and keeps track of what was written.
pub struct OutputSet {
    root: PathBuf,
    /// Relative directory inside `root` where the files of this run live.
    dir: PathBuf,
    written: Vec<FileRecord>,
}

impl OutputSet {
    pub fn new(output_dir: &Path, subdir: &Path) -> CliResult<Self> {
        check_relative(subdir)?;
        Ok(Self {
            root: output_dir.to_path_buf(),
            dir: subdir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Output set for a single file given as `--out`; the manifest goes next
    /// to it.
    pub fn for_file(output_dir: &Path, out: &Path) -> CliResult<(Self, String)> {
        check_relative(out)?;
        let name = out
            .file_name()
            .ok_or_else(|| CliError::usage(format!("`{}` is not a file name", out.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = out.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::new(output_dir, &parent)?, name))
    }

    /// Atomically writes `name` (temporary file in the same directory, then
    /// rename).
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let dir = self.root.join(&self.dir);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut tmp = tempfile::Builder::new()
            .prefix(&format!(".{name}."))
            .suffix(".tmp")
            .tempfile_in(&dir)
            .map_err(|e| CliError::io(&dir, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
        let target = dir.join(name);
        tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
        let rel = self.dir.join(name);
        self.written.retain(|r| Path::new(&r.path) != rel);
        self.written.push(FileRecord {
            path: rel.to_string_lossy().into_owned(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> CliResult<()> {
        self.write(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::compute(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write_str(name, &text)
    }

    /// Writes `manifest.json` with the outputs recorded so far.
    pub fn finish(mut self, manifest: Manifest) -> CliResult<Vec<FileRecord>> {
        let full = ManifestFile {
            tool: "mfspread",
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: mfspread::VERSION,
            subcommand: manifest.subcommand,
            seed: manifest.seed,
            threads: manifest.threads,
            config: manifest.config,
            inputs: manifest.inputs,
            outputs: self.written.clone(),
            warnings: manifest.warnings,
            plots: manifest.plots,
        };
        self.write_json("manifest.json", &full)?;
        Ok(self.written)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotRecord {
    pub file: String,
    /// Points left out because they cannot be placed on the axes (for
    /// example zero or negative values on a log scale).
    pub dropped_points: usize,
}

/// What a subcommand contributes to its manifest.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub subcommand: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub warnings: Vec<String>,
    pub plots: Vec<PlotRecord>,
}

#[derive(Serialize)]
struct ManifestFile {
    tool: &'static str,
    cli_version: &'static str,
    library_version: &'static str,
    subcommand: String,
    seed: Option<u64>,
    threads: usize,
    config: Value,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
    warnings: Vec<String>,
    plots: Vec<PlotRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_only() {
        assert!(check_relative(Path::new("run/a.csv")).is_ok());
        assert!(check_relative(Path::new("./a.csv")).is_ok());
        assert!(check_relative(Path::new("/tmp/a.csv")).is_err());
        assert!(check_relative(Path::new("../a.csv")).is_err());
        assert!(check_relative(Path::new("x/../../a.csv")).is_err());
    }

    #[test]
    fn atomic_write_records_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path(), Path::new("sub")).unwrap();
        out.write_str("a.txt", "abc").unwrap();
        out.write_str("a.txt", "abc").unwrap();
        let files = out.finish(Manifest::default()).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(
            files[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("sub"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
        assert!(dir.path().join("sub/manifest.json").exists());
    }
}
