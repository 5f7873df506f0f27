use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::Format;
use crate::CliError;

pub struct Sink {
    pub dir: PathBuf,
    pub format: Format,
    pub timestamp: bool,
}

impl Sink {
    /// Writes `rows` as `<name>.csv` and/or `<name>.jsonl`; returns the paths.
    pub fn emit<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        if self.format.csv() {
            written.push(self.write_csv(name, rows)?);
        }
        if self.format.jsonl() {
            written.push(self.write_jsonl(name, rows)?);
        }
        Ok(written)
    }

    pub fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut buf = self.header();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        let path = self.dir.join(format!("{name}.csv"));
        atomic_write(&path, &buf)?;
        Ok(path)
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        for r in rows {
            serde_json::to_writer(&mut buf, r).map_err(|e| CliError::Io(e.to_string()))?;
            buf.push(b'\n');
        }
        let path = self.dir.join(format!("{name}.jsonl"));
        atomic_write(&path, &buf)?;
        Ok(path)
    }

    fn header(&self) -> Vec<u8> {
        if !self.timestamp {
            return Vec::new();
        }
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("# generated_unix={secs}\n").into_bytes()
    }
}

/// Temp file in the target directory, then rename over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}
