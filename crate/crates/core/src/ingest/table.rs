use std::collections::HashMap;
use std::io::BufRead;

use rayon::prelude::*;
use serde::Deserialize;

use super::tokenize::TokenizerConfig;
use crate::error::{Error, Result};

/// Token counts over a corpus. Immutable once built; see [`TableBuilder`].
///
/// Counts are stored as `f64` so that tables imported from Zipf lists can
/// carry fractional synthesized counts. Tables built from a corpus hold
/// integer counts, which `f64` represents exactly up to 2^53.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    entries: HashMap<String, f64>,
    total: f64,
    label: String,
}

impl FrequencyTable {
    pub(crate) fn from_parts(entries: HashMap<String, f64>, total: f64, label: String) -> Self {
        Self {
            entries,
            total,
            label,
        }
    }

    /// Build a table directly from `(token, count)` pairs. Repeated tokens accumulate.
    pub fn from_counts<S: Into<String>>(
        counts: impl IntoIterator<Item = (S, u64)>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut builder = TableBuilder::default();
        for (token, count) in counts {
            let token = token.into();
            if token.is_empty() {
                return Err(Error::Config("empty token".into()));
            }
            builder.add_count(token, count);
        }
        Ok(builder.finish(label))
    }

    pub fn empty(label: impl Into<String>) -> Self {
        TableBuilder::default().finish(label)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Raw count; 0 for tokens not in the table.
    pub fn count(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// `count / total`. Absent tokens have relative frequency exactly 0.
    pub fn relative_frequency(&self, token: &str) -> Result<f64> {
        if self.total <= 0.0 {
            return Err(Error::EmptyTable);
        }
        Ok(self.count(token) / self.total)
    }

    /// Like [`relative_frequency`](Self::relative_frequency) but an empty table yields 0.
    pub fn relative_or_zero(&self, token: &str) -> f64 {
        if self.total <= 0.0 {
            0.0
        } else {
            self.count(token) / self.total
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Entries ordered by token bytes, the canonical order used on disk.
    pub fn sorted_entries(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Entry-wise count addition.
    pub fn merged(&self, other: &FrequencyTable, label: impl Into<String>) -> FrequencyTable {
        let mut entries = self.entries.clone();
        for (k, v) in &other.entries {
            *entries.entry(k.clone()).or_insert(0.0) += v;
        }
        FrequencyTable {
            entries,
            total: self.total + other.total,
            label: label.into(),
        }
    }
}

/// Mutable accumulator for [`FrequencyTable`]. Merging is associative and
/// commutative, so sharded builds match serial ones exactly.
#[derive(Debug, Clone, Default)]
pub struct TableBuilder {
    counts: HashMap<String, u64>,
    total: u64,
}

impl TableBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_document(&mut self, text: &str, tokenizer: &TokenizerConfig) {
        tokenizer.for_each_token(text, |tok| self.add_token(tok));
    }

    pub fn add_token(&mut self, token: &str) {
        match self.counts.get_mut(token) {
            Some(c) => *c += 1,
            None => {
                self.counts.insert(token.to_owned(), 1);
            }
        }
        self.total += 1;
    }

    fn add_count(&mut self, token: String, count: u64) {
        *self.counts.entry(token).or_insert(0) += count;
        self.total += count;
    }

    pub fn merge(&mut self, other: TableBuilder) {
        if other.counts.len() > self.counts.len() {
            let mine = std::mem::replace(self, other);
            return self.merge(mine);
        }
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn finish(self, label: impl Into<String>) -> FrequencyTable {
        let entries = self
            .counts
            .into_iter()
            .map(|(k, v)| (k, v as f64))
            .collect();
        FrequencyTable {
            entries,
            total: self.total as f64,
            label: label.into(),
        }
    }
}

pub fn build_table<I, S>(corpus: I, tokenizer: &TokenizerConfig, label: &str) -> FrequencyTable
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut builder = TableBuilder::new();
    for doc in corpus {
        builder.add_document(doc.as_ref(), tokenizer);
    }
    builder.finish(label)
}

fn build_builder_parallel<S: AsRef<str> + Sync>(docs: &[S], tokenizer: &TokenizerConfig) -> TableBuilder {
    docs.par_iter()
        .fold(TableBuilder::new, |mut b, d| {
            b.add_document(d.as_ref(), tokenizer);
            b
        })
        .reduce(TableBuilder::new, |mut a, b| {
            a.merge(b);
            a
        })
}

/// Shard `corpus` across `threads` workers and merge the partial tables.
pub fn build_table_parallel<S: AsRef<str> + Sync>(
    corpus: &[S],
    tokenizer: &TokenizerConfig,
    label: &str,
    threads: usize,
) -> Result<FrequencyTable> {
    let pool = thread_pool(threads)?;
    Ok(pool.install(|| build_builder_parallel(corpus, tokenizer)).finish(label))
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// One document per line.
    #[default]
    Lines,
    /// One JSON object per line with a string `text` field.
    JsonLines,
}

#[derive(Debug)]
pub struct IngestReport {
    pub table: FrequencyTable,
    pub records: u64,
    pub skipped: u64,
}

#[derive(Deserialize)]
struct TextRecord {
    text: String,
}

const INGEST_BATCH: usize = 8192;

/// Stream a corpus into a table in one pass. Memory grows with the
/// vocabulary plus one batch of records, not with the corpus.
///
/// Lines that are not valid UTF-8, or JSON records without a `text` string,
/// are skipped and counted. An I/O error aborts with the progress so far.
pub fn ingest_corpus<R: BufRead>(
    mut reader: R,
    format: CorpusFormat,
    tokenizer: &TokenizerConfig,
    label: &str,
    threads: usize,
) -> Result<IngestReport> {
    let pool = thread_pool(threads)?;
    let mut builder = TableBuilder::new();
    let mut batch: Vec<String> = Vec::with_capacity(INGEST_BATCH);
    let mut records = 0u64;
    let mut skipped = 0u64;
    let mut line = Vec::new();

    let flush = |batch: &mut Vec<String>, builder: &mut TableBuilder| {
        if threads == 1 {
            for d in batch.iter() {
                builder.add_document(d, tokenizer);
            }
        } else {
            builder.merge(pool.install(|| build_builder_parallel(batch, tokenizer)));
        }
        batch.clear();
    };

    loop {
        line.clear();
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(source) => {
                return Err(Error::IngestAborted {
                    records,
                    skipped,
                    source,
                })
            }
        }
        while matches!(line.last(), Some(b'\n' | b'\r')) {
            line.pop();
        }
        if line.is_empty() {
            continue;
        }
        records += 1;
        let text = match std::str::from_utf8(&line) {
            Ok(s) => s,
            Err(_) => {
                skipped += 1;
                tracing::warn!(record = records, "skipping record that is not valid UTF-8");
                continue;
            }
        };
        let doc = match format {
            CorpusFormat::Lines => text.to_owned(),
            CorpusFormat::JsonLines => match serde_json::from_str::<TextRecord>(text) {
                Ok(r) => r.text,
                Err(e) => {
                    skipped += 1;
                    tracing::warn!(record = records, error = %e, "skipping unreadable record");
                    continue;
                }
            },
        };
        batch.push(doc);
        if batch.len() == INGEST_BATCH {
            flush(&mut batch, &mut builder);
        }
    }
    flush(&mut batch, &mut builder);

    Ok(IngestReport {
        table: builder.finish(label),
        records,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tk() -> TokenizerConfig {
        TokenizerConfig::default()
    }

    #[test]
    fn counts_two_documents() {
        let t = build_table(["the cat", "the sat"], &tk(), "D");
        assert_eq!(t.count("the"), 2.0);
        assert_eq!(t.count("cat"), 1.0);
        assert_eq!(t.count("sat"), 1.0);
        assert_eq!(t.total(), 4.0);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn empty_corpus() {
        let t = build_table(Vec::<String>::new(), &tk(), "D");
        assert_eq!(t.total(), 0.0);
        assert!(t.is_empty());
        assert!(matches!(t.relative_frequency("x"), Err(Error::EmptyTable)));
    }

    #[test]
    fn repeated_document_scales_linearly() {
        let doc = "Once upon a time, a cat sat upon a mat.";
        let single = build_table([doc], &tk(), "D");
        let many = build_table(std::iter::repeat_n(doc, 1000), &tk(), "D");
        assert_eq!(many.total(), single.total() * 1000.0);
        for (tok, c) in single.iter() {
            assert_eq!(many.count(tok), c * 1000.0);
        }
        assert_eq!(many.len(), single.len());
    }

    #[test]
    fn ingest_skips_bad_records() {
        let input = b"{\"text\": \"the cat\"}\nnot json\n{\"id\": 3}\n\n{\"text\": \"the\"}\n\xff\xfe\n";
        let rep = ingest_corpus(&input[..], CorpusFormat::JsonLines, &tk(), "D", 1).unwrap();
        assert_eq!(rep.records, 5);
        assert_eq!(rep.skipped, 3);
        assert_eq!(rep.table.count("the"), 2.0);
        assert_eq!(rep.table.total(), 3.0);
    }

    #[test]
    fn ingest_reports_partial_progress_on_io_error() {
        struct Failing(usize);
        impl std::io::Read for Failing {
            fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
                if self.0 == 0 {
                    self.0 += 1;
                    let s = b"a b\nc d\n";
                    buf[..s.len()].copy_from_slice(s);
                    Ok(s.len())
                } else {
                    Err(std::io::Error::other("disk gone"))
                }
            }
        }
        let err = ingest_corpus(
            std::io::BufReader::new(Failing(0)),
            CorpusFormat::Lines,
            &tk(),
            "D",
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::IngestAborted { records: 2, skipped: 0, .. }), "{err}");
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(build_table_parallel(&["a"], &tk(), "D", 0).is_err());
    }
}
