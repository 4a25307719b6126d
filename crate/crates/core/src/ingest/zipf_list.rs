use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::table::FrequencyTable;
use crate::error::{Error, Result};
use crate::freq::zipf_to_relative;

/// Per-billion convention of published Zipf word lists.
pub const DEFAULT_VIRTUAL_TOTAL: f64 = 1e9;

/// Read `token<TAB>zipf` lines into a table whose relative frequencies are
/// `10^(zipf - 9)`. Counts are synthesized as `relative * virtual_total`
/// and the table total is `virtual_total`; the listed tokens need not
/// account for all of that mass.
pub fn import_zipf_list<R: BufRead>(
    reader: R,
    source: &Path,
    virtual_total: f64,
    label: &str,
) -> Result<FrequencyTable> {
    if !(virtual_total.is_finite() && virtual_total > 0.0) {
        return Err(Error::Config(format!(
            "virtual total must be positive and finite, got {virtual_total}"
        )));
    }
    let mut entries = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (token, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(source, n, "expected token<TAB>zipf"))?;
        if token.is_empty() {
            return Err(Error::format(source, n, "empty token"));
        }
        let zipf: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::format(source, n, format!("bad Zipf value {value:?}")))?;
        if !zipf.is_finite() || zipf > 9.0 {
            return Err(Error::format(
                source,
                n,
                format!("Zipf value {zipf} is outside (-inf, 9]"),
            ));
        }
        let count = zipf_to_relative(zipf) * virtual_total;
        if entries.insert(token.to_owned(), count).is_some() {
            return Err(Error::format(source, n, format!("duplicate token {token:?}")));
        }
    }
    Ok(FrequencyTable::from_parts(entries, virtual_total, label.to_owned()))
}
