use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ClientError;

/// One line of a session file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub request_digest: String,
    pub raw_text: String,
    pub recorded_at: DateTime<Utc>,
}

fn session_err(path: &Path, detail: impl ToString) -> ClientError {
    ClientError::Session { path: path.to_path_buf(), detail: detail.to_string() }
}

/// Recorded responses keyed by request digest. Later lines override
/// earlier ones.
#[derive(Debug, Clone, Default)]
pub struct ReplaySession {
    path: PathBuf,
    entries: HashMap<String, String>,
}

impl ReplaySession {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| session_err(path, e))?;
        let mut entries = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| session_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: SessionEntry = serde_json::from_str(&line)
                .map_err(|e| session_err(path, format!("line {}: {e}", n + 1)))?;
            entries.insert(entry.request_digest, entry.raw_text);
        }
        Ok(Self { path: path.to_path_buf(), entries })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = SessionEntry>) -> Self {
        Self {
            path: PathBuf::new(),
            entries: entries.into_iter().map(|e| (e.request_digest, e.raw_text)).collect(),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, digest: &str) -> Option<&str> {
        self.entries.get(digest).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Append-only session writer shared across worker threads.
#[derive(Debug)]
pub struct SessionRecorder {
    path: PathBuf,
    file: Mutex<File>,
}

impl SessionRecorder {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| session_err(path, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| session_err(path, e))?;
        Ok(Self { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, digest: &str, raw_text: &str) -> Result<(), ClientError> {
        let entry = SessionEntry {
            request_digest: digest.to_string(),
            raw_text: raw_text.to_string(),
            recorded_at: Utc::now(),
        };
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes()).map_err(|e| session_err(&self.path, e))?;
        file.flush().map_err(|e| session_err(&self.path, e))
    }
}
