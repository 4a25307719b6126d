//! Line-oriented table format.
//!
//! ```text
//! tfl-table/1 <total> <label>
//! <token>\t<count>
//! ...
//! #end <entries>
//! ```
//!
//! Entries are sorted by token bytes. Numbers use the shortest decimal form
//! that parses back to the same `f64`, so integer counts print as integers
//! and every save/load round trip is bit-exact. The `#end` trailer guards
//! against truncation; files without it are accepted only when the counts
//! sum exactly to the header total.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::table::FrequencyTable;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const TABLE_MAGIC: &str = "tfl-table/1";
const TRAILER: &str = "#end ";

pub fn write_table(table: &FrequencyTable, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{TABLE_MAGIC} {} {}", table.total(), table.label())?;
    let entries = table.sorted_entries();
    for (token, count) in &entries {
        writeln!(w, "{token}\t{count}")?;
    }
    writeln!(w, "{TRAILER}{}", entries.len())
}

fn validate_for_save(table: &FrequencyTable) -> Result<()> {
    if table.label().contains(['\n', '\r']) {
        return Err(Error::Config("table label may not contain line breaks".into()));
    }
    if let Some((tok, _)) = table.iter().find(|(t, _)| t.contains(['\t', '\n', '\r'])) {
        return Err(Error::Config(format!(
            "token {tok:?} contains a tab or line break and cannot be saved"
        )));
    }
    Ok(())
}

pub fn save_table(table: &FrequencyTable, path: &Path) -> Result<()> {
    validate_for_save(table)?;
    write_atomic(path, |w| write_table(table, w))
}

pub fn load_table(path: &Path) -> Result<FrequencyTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::format(path, line, "invalid UTF-8")
    })?;
    parse_table(text, path)
}

pub fn parse_table(text: &str, path: &Path) -> Result<FrequencyTable> {
    let err = |line: usize, msg: &str| Error::format(path, line, msg);

    let mut lines = text.split_inclusive('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let header = header
        .strip_suffix('\n')
        .ok_or_else(|| err(1, "truncated header"))?;
    let rest = header
        .strip_prefix(TABLE_MAGIC)
        .ok_or_else(|| {
            let found = header.split(' ').next().unwrap_or("");
            err(1, &format!("unsupported format version {found:?}, expected {TABLE_MAGIC:?}"))
        })?;
    let rest = match rest.strip_prefix(' ') {
        Some(r) => r,
        None => return Err(err(1, "header is missing the total")),
    };
    let (total_str, label) = rest.split_once(' ').unwrap_or((rest, ""));
    let total: f64 = total_str
        .parse()
        .map_err(|_| err(1, &format!("bad total {total_str:?}")))?;
    if !total.is_finite() || total < 0.0 {
        return Err(err(1, "total must be a finite non-negative number"));
    }

    let mut entries = HashMap::new();
    let mut trailer: Option<usize> = None;
    for (n, raw) in lines {
        let line = raw
            .strip_suffix('\n')
            .ok_or_else(|| err(n, "truncated line (missing newline)"))?;
        if trailer.is_some() {
            return Err(err(n, "content after #end trailer"));
        }
        if let Some((token, count)) = line.split_once('\t') {
            if token.is_empty() {
                return Err(err(n, "empty token"));
            }
            let count: f64 = count
                .parse()
                .map_err(|_| err(n, &format!("bad count {count:?}")))?;
            if !count.is_finite() || count < 0.0 {
                return Err(err(n, "count must be a finite non-negative number"));
            }
            if entries.insert(token.to_owned(), count).is_some() {
                return Err(err(n, &format!("duplicate token {token:?}")));
            }
        } else if let Some(k) = line.strip_prefix(TRAILER) {
            trailer = Some(k.parse().map_err(|_| err(n, "bad #end trailer"))?);
        } else {
            return Err(err(n, "expected token<TAB>count"));
        }
    }

    let last_line = text.lines().count().max(1);
    match trailer {
        Some(k) if k != entries.len() => {
            return Err(err(
                last_line,
                &format!("trailer declares {k} entries but {} were read", entries.len()),
            ))
        }
        Some(_) => {}
        None => {
            let mut sorted: Vec<_> = entries.iter().collect();
            sorted.sort_unstable_by(|a, b| a.0.cmp(b.0));
            let sum: f64 = sorted.iter().map(|(_, &c)| c).sum();
            if sum != total {
                return Err(err(
                    last_line,
                    "no #end trailer and counts do not sum to the header total (truncated?)",
                ));
            }
        }
    }
    Ok(FrequencyTable::from_parts(entries, total, label.to_owned()))
}
