use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug)]
pub(crate) enum ReadError {
    Io(io::Error),
    Parse { line: usize, source: serde_json::Error },
}

/// Reads a line-delimited JSON file. Blank lines are skipped; line numbers
/// are 1-based and refer to physical lines.
pub(crate) fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, ReadError> {
    let file = File::open(path).map_err(ReadError::Io)?;
    read_from(BufReader::new(file))
}

pub(crate) fn read_from<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<(usize, T)>, ReadError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(ReadError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| ReadError::Parse { line: idx + 1, source })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

pub(crate) fn write_line<T: Serialize, W: Write>(mut writer: W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut writer, value)?;
    writer.write_all(b"\n")
}
