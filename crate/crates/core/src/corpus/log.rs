//! Append-only annotation log.
//!
//! One JSON object per line, each carrying a 1-based, gap-free sequence
//! number. Appends are serialized behind a lock and synced to disk before
//! they are acknowledged; readers only ever see whole, acknowledged entries.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::humaneval::{Annotation, SchemaError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub annotation: Annotation,
}

/// Acknowledgment of an accepted annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub annotation_id: String,
    pub seq: u64,
    /// True when the annotation id was already logged with identical content.
    pub duplicate: bool,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("schema violation: {0}")]
    Schema(#[from] SchemaError),
    #[error("annotation id {0:?} was already logged with different content")]
    IdConflict(String),
    #[error("{path}:{line}: corrupt log entry: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
}

#[derive(Debug, Default)]
struct Inner {
    file: Option<File>,
    entries: Vec<LogEntry>,
    by_id: HashMap<String, usize>,
}

/// Append-only, idempotent annotation store with a single-writer contract.
#[derive(Debug, Default)]
pub struct AnnotationLog {
    path: Option<PathBuf>,
    inner: RwLock<Inner>,
}

impl AnnotationLog {
    /// A log that is not backed by a file.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a file-backed log and replays its entries. A
    /// trailing partial line left by an interrupted write is truncated.
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut inner = Inner::default();
        let mut reader = BufReader::new(&file);
        let mut good_len: u64 = 0;
        let mut line_no = 0;
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            if !buf.ends_with('\n') {
                // Interrupted append: never acknowledged, so drop it.
                break;
            }
            let corrupt = |message: String| LogError::Corrupt {
                path: path.to_path_buf(),
                line: line_no,
                message,
            };
            if !buf.trim().is_empty() {
                let entry: LogEntry = serde_json::from_str(buf.trim_end()).map_err(|e| corrupt(e.to_string()))?;
                let expected = inner.entries.len() as u64 + 1;
                if entry.seq != expected {
                    return Err(corrupt(format!(
                        "sequence number {} where {expected} was expected",
                        entry.seq
                    )));
                }
                let id = entry.annotation.annotation_id().to_string();
                if inner.by_id.insert(id.clone(), inner.entries.len()).is_some() {
                    return Err(corrupt(format!("annotation id {id:?} appears twice")));
                }
                inner.entries.push(entry);
            }
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.seek(SeekFrom::End(0))?;
        }
        inner.file = Some(file);
        Ok(Self {
            path: Some(path.to_path_buf()),
            inner: RwLock::new(inner),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends an annotation. Re-sending an identical annotation with an id
    /// already in the log returns the original acknowledgment.
    pub fn append(&self, annotation: Annotation) -> Result<Ack, LogError> {
        annotation.validate()?;
        let mut inner = self.inner.write().unwrap_or_else(|e| e.into_inner());
        let id = annotation.annotation_id().to_string();
        if let Some(&idx) = inner.by_id.get(&id) {
            let existing = &inner.entries[idx];
            if existing.annotation == annotation {
                return Ok(Ack {
                    annotation_id: id,
                    seq: existing.seq,
                    duplicate: true,
                });
            }
            return Err(LogError::IdConflict(id));
        }
        let entry = LogEntry {
            seq: inner.entries.len() as u64 + 1,
            annotation,
        };
        if let Some(file) = inner.file.as_mut() {
            let mut line = serde_json::to_vec(&entry).map_err(io::Error::other)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        let seq = entry.seq;
        let idx = inner.entries.len();
        inner.entries.push(entry);
        inner.by_id.insert(id.clone(), idx);
        Ok(Ack {
            annotation_id: id,
            seq,
            duplicate: false,
        })
    }

    pub fn len(&self) -> usize {
        self.read().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshot of all entries in sequence order.
    pub fn entries(&self) -> Vec<LogEntry> {
        self.read().entries.clone()
    }

    /// The first `n` entries (or all, if fewer).
    pub fn prefix(&self, n: usize) -> Vec<LogEntry> {
        let inner = self.read();
        inner.entries[..n.min(inner.entries.len())].to_vec()
    }

    pub fn get(&self, annotation_id: &str) -> Option<LogEntry> {
        let inner = self.read();
        inner.by_id.get(annotation_id).map(|&i| inner.entries[i].clone())
    }

    /// Writes every entry as line-delimited JSON in sequence order.
    pub fn export<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.read().entries {
            crate::jsonl::write_line(&mut w, e)?;
        }
        Ok(())
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }
}

/// Reads an exported log (or the log file itself) without opening it for
/// writing.
pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, LogError> {
    let file = File::open(path)?;
    crate::jsonl::read_from::<LogEntry, _>(BufReader::new(file))
        .map(|v| v.into_iter().map(|(_, e)| e).collect())
        .map_err(|e| match e {
            crate::jsonl::ReadError::Io(e) => LogError::Storage(e),
            crate::jsonl::ReadError::Parse { line, source } => LogError::Corrupt {
                path: path.to_path_buf(),
                line,
                message: source.to_string(),
            },
        })
}
