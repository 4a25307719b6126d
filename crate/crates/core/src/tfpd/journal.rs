//! Append-only JSON-lines event journal.
//!
//! Every event is written as one line and synced before the caller
//! acknowledges it. On open, a final line without its newline is a torn
//! write that was never acknowledged; it is cut off. Any other unparsable
//! line is corruption and fails the open.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Open (or create) the journal and return every complete event in order.
    pub fn open<E: DeserializeOwned>(path: &Path) -> Result<(Self, Vec<E>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;

        let mut events = Vec::new();
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < bytes.len() {
            line_no += 1;
            let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
                tracing::warn!(
                    path = %path.display(),
                    bytes = bytes.len() - offset,
                    "discarding torn journal tail"
                );
                file.set_len(offset as u64).map_err(|e| Error::io(path, e))?;
                file.sync_data().map_err(|e| Error::io(path, e))?;
                break;
            };
            let line = &bytes[offset..offset + nl];
            let event = serde_json::from_slice(line).map_err(|e| Error::Journal {
                path: path.to_owned(),
                line: line_no,
                message: e.to_string(),
            })?;
            events.push(event);
            offset += nl + 1;
        }
        file.seek(SeekFrom::End(0)).map_err(|e| Error::io(path, e))?;
        Ok((
            Self {
                path: path.to_owned(),
                file,
            },
            events,
        ))
    }

    /// Write one event and sync it to disk.
    pub fn append<E: Serialize>(&mut self, event: &E) -> Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
