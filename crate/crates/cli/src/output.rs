//! Input capture, all-or-nothing output commits and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: usize,
}

fn digest(path: &Path, bytes: &[u8]) -> FileDigest {
    FileDigest {
        path: path.to_owned(),
        sha256: hex::encode(Sha256::digest(bytes)),
        bytes: bytes.len(),
    }
}

/// Everything a command read and everything it wants written. Nothing
/// touches the file system until [`Artifacts::commit`].
#[derive(Debug, Default)]
pub struct Artifacts {
    inputs: Vec<FileDigest>,
    files: Vec<(PathBuf, Vec<u8>)>,
    pub seed: Option<u64>,
}

impl Artifacts {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(digest(path, &bytes));
        Ok(bytes)
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| CliError::Usage(format!("{} is not valid UTF-8", path.display())))
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn add_json<T: Serialize>(
        &mut self,
        path: impl Into<PathBuf>,
        value: &T,
    ) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Core(zonal_kriging::Error::Json(e)))?;
        text.push(b'\n');
        self.add(path, text);
        Ok(())
    }

    /// Writes every output and then the manifest. Each file goes to a
    /// temporary sibling first, so a failure leaves no partial outputs.
    pub fn commit(mut self, command: &str, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let first = self
            .files
            .first()
            .map(|(p, _)| p.clone())
            .ok_or_else(|| CliError::Usage("command produced no output".into()))?;
        let manifest_path = cfg
            .manifest
            .clone()
            .unwrap_or_else(|| first.with_extension("manifest.json"));
        let config_json = serde_json::to_vec(cfg).expect("config serializes");
        let manifest = Manifest {
            command,
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: zonal_kriging::VERSION,
            model_format_version: zonal_kriging::zonal::FORMAT_VERSION,
            config_sha256: hex::encode(Sha256::digest(&config_json)),
            seed: self.seed,
            threads: rayon::current_num_threads(),
            config: cfg,
            inputs: &self.inputs,
            outputs: self.files.iter().map(|(p, b)| digest(p, b)).collect(),
        };
        let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        text.push(b'\n');
        self.files.push((manifest_path.clone(), text));
        write_all_or_nothing(&self.files)?;
        Ok(manifest_path)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    cli_version: &'static str,
    library_version: &'static str,
    model_format_version: u32,
    config_sha256: String,
    seed: Option<u64>,
    threads: usize,
    config: &'a RunConfig,
    inputs: &'a [FileDigest],
    outputs: Vec<FileDigest>,
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

fn write_all_or_nothing(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    let cleanup = |staged: &[PathBuf]| {
        for t in staged {
            let _ = fs::remove_file(t);
        }
    };
    for (path, bytes) in files {
        let tmp = temp_sibling(path);
        if let Err(e) = fs::write(&tmp, bytes) {
            cleanup(&staged);
            return Err(CliError::io(path, e));
        }
        staged.push(tmp);
    }
    for (tmp, (path, _)) in staged.iter().zip(files) {
        fs::rename(tmp, path).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}
