use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fsutil::write_atomic;

/// One accepted paraphrase pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfpdRecord {
    pub source_id: String,
    pub high_text: String,
    pub low_text: String,
    pub ground_truth: serde_json::Value,
}

/// Whitespace word-length statistics for one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub max: Option<usize>,
    pub min: Option<usize>,
}

impl LengthStats {
    pub fn of<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let lens: Vec<usize> = texts.into_iter().map(|t| t.split_whitespace().count()).collect();
        let count = lens.len();
        Self {
            count,
            mean: (count > 0).then(|| lens.iter().sum::<usize>() as f64 / count as f64),
            max: lens.iter().copied().max(),
            min: lens.iter().copied().min(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportStats {
    pub high: LengthStats,
    pub low: LengthStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportSummary {
    pub records: usize,
    pub path: PathBuf,
    pub stats_path: PathBuf,
    pub stats: ExportStats,
}

pub fn stats_path(destination: &Path) -> PathBuf {
    let mut name = destination.file_name().unwrap_or_default().to_os_string();
    name.push(".stats.json");
    destination.with_file_name(name)
}

pub fn export_stats(records: &[TfpdRecord]) -> ExportStats {
    ExportStats {
        high: LengthStats::of(records.iter().map(|r| r.high_text.as_str())),
        low: LengthStats::of(records.iter().map(|r| r.low_text.as_str())),
    }
}

pub fn write_records(w: &mut dyn Write, records: &[TfpdRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Write records sorted by source id as JSON lines, plus a sibling
/// `<name>.stats.json` with per-partition length statistics.
pub fn export_records(records: &[TfpdRecord], destination: &Path) -> Result<ExportSummary> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    write_atomic(destination, |w| write_records(w, &sorted))?;
    let stats = export_stats(&sorted);
    let sp = stats_path(destination);
    write_atomic(&sp, |w| {
        serde_json::to_writer_pretty(&mut *w, &stats)?;
        w.write_all(b"\n")
    })?;
    Ok(ExportSummary {
        records: sorted.len(),
        path: destination.to_owned(),
        stats_path: sp,
        stats,
    })
}
