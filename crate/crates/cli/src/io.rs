use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use textfreq::fsutil::write_atomic;
use textfreq::Error;

/// Open a file, or stdin for `-`.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>, Error> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(Box::new(BufReader::new(f)))
}

/// Non-blank lines with surrounding whitespace removed.
pub fn read_lines(path: &Path) -> Result<Vec<String>, Error> {
    let mut out = Vec::new();
    for line in open_input(path)?.lines() {
        let line = line.map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        let line = line.trim();
        if !line.is_empty() {
            out.push(line.to_owned());
        }
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let mut out = Vec::new();
    for (i, line) in open_input(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Write to `path` atomically, or to stdout when no path is given.
pub fn emit<F>(path: Option<&Path>, fill: F) -> Result<(), Error>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => write_atomic(p, fill),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            fill(&mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

pub fn write_jsonl<T: Serialize>(w: &mut dyn Write, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Print the effective configuration of a run as one JSON line on stderr.
pub fn echo_config<T: Serialize>(command: &str, config: &T) {
    let line = serde_json::json!({ "command": command, "config": config });
    eprintln!("{line}");
}
