//! Persistence of the whole contest state as one document.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::state::ContestState;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store location {path} is not reachable: {message}")]
    Unreachable { path: PathBuf, message: String },
    #[error("store document {path} is corrupt: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("store write failed: {0}")]
    Write(String),
}

/// Narrow repository interface. `save` must be atomic: after a crash the
/// store holds either the previous or the new document.
pub trait Store: Send + Sync {
    fn load(&self) -> Result<Option<ContestState>, StoreError>;
    fn save(&self, state: &ContestState) -> Result<(), StoreError>;
    fn describe(&self) -> String;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    committed: Mutex<Option<ContestState>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for MemoryStore {
    fn load(&self) -> Result<Option<ContestState>, StoreError> {
        Ok(self.committed.lock().expect("store lock").clone())
    }

    fn save(&self, state: &ContestState) -> Result<(), StoreError> {
        *self.committed.lock().expect("store lock") = Some(state.clone());
        Ok(())
    }

    fn describe(&self) -> String {
        "memory".into()
    }
}

/// JSON document on disk, replaced by write-to-temp-then-rename.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
}

impl FileStore {
    /// Fails when the parent directory does not exist or is not writable.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let unreachable = |message: String| StoreError::Unreachable { path: path.to_path_buf(), message };
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let meta = fs::metadata(&dir).map_err(|e| unreachable(e.to_string()))?;
        if !meta.is_dir() {
            return Err(unreachable(format!("{} is not a directory", dir.display())));
        }
        let probe = dir.join(format!(".{}.probe", std::process::id()));
        File::create(&probe).map_err(|e| unreachable(e.to_string()))?;
        let _ = fs::remove_file(&probe);
        Ok(FileStore { path: path.to_path_buf() })
    }

    fn temp_path(&self) -> PathBuf {
        let mut name = self.path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".tmp");
        self.path.with_file_name(name)
    }
}

impl Store for FileStore {
    fn load(&self) -> Result<Option<ContestState>, StoreError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(StoreError::Unreachable { path: self.path.clone(), message: e.to_string() }),
        };
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| StoreError::Corrupt { path: self.path.clone(), message: e.to_string() })
    }

    fn save(&self, state: &ContestState) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec(state).map_err(|e| StoreError::Write(e.to_string()))?;
        let tmp = self.temp_path();
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &self.path)
        };
        write().map_err(|e| StoreError::Write(format!("{}: {e}", self.path.display())))
    }

    fn describe(&self) -> String {
        format!("file {}", self.path.display())
    }
}
