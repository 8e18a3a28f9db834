//! In-memory artifacts and the single writer that puts them on disk.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Fixed-precision float rendering shared by every table.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}

/// CSV table assembled row by row, then rendered with `\n` line endings.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table {
            writer,
            width: header.len(),
        }
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: impl IntoIterator<Item = S>) {
        let fields: Vec<S> = fields.into_iter().collect();
        assert_eq!(fields.len(), self.width, "row width differs from header");
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub format: Format,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn csv(name: &str, table: Table) -> Self {
        Artifact {
            name: name.into(),
            format: Format::Csv,
            bytes: table.into_bytes(),
        }
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
        bytes.push(b'\n');
        Ok(Artifact {
            name: name.into(),
            format: Format::Json,
            bytes,
        })
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_sha256: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Deletes the files named by an earlier manifest in `dir`, so the directory
/// never holds outputs the new manifest does not list.
fn remove_previous(dir: &Path) -> Result<(), CliError> {
    let path = dir.join(MANIFEST_NAME);
    let Ok(text) = std::fs::read(&path) else {
        return Ok(());
    };
    let Ok(old) = serde_json::from_slice::<RunManifest>(&text) else {
        return Ok(());
    };
    for e in old.files {
        let name = Path::new(&e.file);
        // Only plain file names are ever written.
        if name.components().count() != 1 {
            continue;
        }
        let f = dir.join(name);
        match std::fs::remove_file(&f) {
            Err(err) if err.kind() != std::io::ErrorKind::NotFound => return Err(io(&f)(err)),
            _ => {}
        }
    }
    Ok(())
}

/// Writes the artifacts in order and then the manifest describing them.
pub fn write_all(
    dir: &Path,
    artifacts: &[Artifact],
    subcommand: &str,
    config_bytes: &[u8],
    started_unix: f64,
) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    remove_previous(dir)?;
    let mut files = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path: PathBuf = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(io(&path))?;
        files.push(ManifestEntry {
            file: a.name.clone(),
            sha256: sha256_hex(&a.bytes),
            bytes: a.bytes.len(),
        });
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        config_sha256: sha256_hex(config_bytes),
        started_unix,
        finished_unix: unix_now(),
        files,
    };
    let m = Artifact::json(MANIFEST_NAME, &manifest)?;
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, &m.bytes).map_err(io(&path))?;
    Ok(manifest)
}
