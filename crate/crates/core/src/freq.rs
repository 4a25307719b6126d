//! Word- and sentence-level frequency.
//!
//! Sentence frequency is the geometric mean of the relative frequencies of
//! its tokens, so a higher score means a more common sentence. All sentence
//! math happens in natural-log space; the Zipf display scale is base 10.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FrequencyTable, TokenizerConfig};

/// A source of per-token relative frequencies.
pub trait WordFrequency {
    fn word_frequency(&self, token: &str) -> Result<f64>;
}

impl WordFrequency for FrequencyTable {
    fn word_frequency(&self, token: &str) -> Result<f64> {
        self.relative_frequency(token)
    }
}

impl<T: WordFrequency + ?Sized> WordFrequency for &T {
    fn word_frequency(&self, token: &str) -> Result<f64> {
        (**self).word_frequency(token)
    }
}

impl<T: WordFrequency + ?Sized> WordFrequency for Box<T> {
    fn word_frequency(&self, token: &str) -> Result<f64> {
        (**self).word_frequency(token)
    }
}

/// Relative frequency of an already-normalized token; exactly 0 when absent.
pub fn word_frequency(token: &str, table: &FrequencyTable) -> Result<f64> {
    table.relative_frequency(token)
}

/// `log10(relative) + 9`: occurrences per billion on a log scale.
pub fn zipf_scale(relative: f64) -> Result<f64> {
    if relative.is_nan() || relative <= 0.0 {
        return Err(Error::Domain(relative));
    }
    Ok(relative.log10() + 9.0)
}

/// Inverse of [`zipf_scale`].
pub fn zipf_to_relative(zipf: f64) -> f64 {
    10f64.powf(zipf - 9.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingPolicy {
    floor: f64,
}

impl SmoothingPolicy {
    pub const DEFAULT_FLOOR: f64 = 1e-9;

    pub fn new(floor: f64) -> Result<Self> {
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::Config(format!("smoothing floor must be > 0, got {floor}")));
        }
        Ok(Self { floor })
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Raw zeros always stay in the tables; the floor exists only at scoring time.
    pub fn preserve_raw_zero(&self) -> bool {
        true
    }

    pub fn apply(&self, relative: f64) -> f64 {
        relative.max(self.floor)
    }
}

impl Default for SmoothingPolicy {
    fn default() -> Self {
        Self {
            floor: Self::DEFAULT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub text: String,
    pub token_count: usize,
    /// Mean of `ln(max(wfreq, floor))` over tokens.
    pub log_sfreq: f64,
    /// `log_sfreq / ln 10 + 9`.
    pub zipf_sfreq: f64,
}

impl SentenceScore {
    pub fn from_log(text: impl Into<String>, token_count: usize, log_sfreq: f64) -> Result<Self> {
        if token_count == 0 {
            return Err(Error::EmptySentence);
        }
        if log_sfreq.is_nan() {
            return Err(Error::Config("sentence score is NaN".into()));
        }
        Ok(Self {
            text: text.into(),
            token_count,
            log_sfreq,
            zipf_sfreq: log_sfreq / std::f64::consts::LN_10 + 9.0,
        })
    }

    pub fn sfreq(&self) -> f64 {
        self.log_sfreq.exp()
    }
}

/// Mean log frequency of a token multiset.
///
/// Tokens are grouped and visited in byte order with weights `count / K`,
/// which makes the result bit-identical under any permutation of the tokens
/// and under repeating the whole multiset.
pub fn mean_log_frequency<'t, I, F>(tokens: I, mut frequency: F, smoothing: &SmoothingPolicy) -> Result<(usize, f64)>
where
    I: IntoIterator<Item = &'t str>,
    F: FnMut(&str) -> Result<f64>,
{
    let mut multiset: BTreeMap<&str, usize> = BTreeMap::new();
    let mut k = 0usize;
    for t in tokens {
        *multiset.entry(t).or_insert(0) += 1;
        k += 1;
    }
    if k == 0 {
        return Err(Error::EmptySentence);
    }
    let kf = k as f64;
    let mut acc = 0.0;
    for (tok, c) in multiset {
        let f = smoothing.apply(frequency(tok)?);
        acc += (c as f64 / kf) * f.ln();
    }
    Ok((k, acc))
}

/// Scores sentences against any [`WordFrequency`] source.
#[derive(Debug, Clone)]
pub struct SentenceScorer<S> {
    pub source: S,
    pub smoothing: SmoothingPolicy,
    pub tokenizer: TokenizerConfig,
}

impl<S: WordFrequency> SentenceScorer<S> {
    pub fn new(source: S) -> Self {
        Self {
            source,
            smoothing: SmoothingPolicy::default(),
            tokenizer: TokenizerConfig::default(),
        }
    }

    pub fn with_smoothing(mut self, smoothing: SmoothingPolicy) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn score(&self, text: &str) -> Result<SentenceScore> {
        let tokens = self.tokenizer.tokenize(text);
        self.score_tokens(text, &tokens)
    }

    pub fn score_tokens<T: AsRef<str>>(&self, text: &str, tokens: &[T]) -> Result<SentenceScore> {
        let (k, log) = mean_log_frequency(
            tokens.iter().map(AsRef::as_ref),
            |t| self.source.word_frequency(t),
            &self.smoothing,
        )?;
        SentenceScore::from_log(text, k, log)
    }
}

pub fn sentence_frequency(
    text: &str,
    table: &FrequencyTable,
    smoothing: &SmoothingPolicy,
    tokenizer: &TokenizerConfig,
) -> Result<SentenceScore> {
    SentenceScorer {
        source: table,
        smoothing: *smoothing,
        tokenizer: *tokenizer,
    }
    .score(text)
}

/// Counts per half-open bin `[edges[i], edges[i+1])`, plus values that fall
/// outside every bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.below + self.above
    }
}

pub fn bin_values(values: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::Config("need at least two bin edges".into()));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("bin edges must be finite and strictly ascending".into()));
    }
    let mut h = Histogram {
        edges: edges.to_vec(),
        counts: vec![0; edges.len() - 1],
        below: 0,
        above: 0,
    };
    for &v in values {
        if v.is_nan() {
            return Err(Error::Config("cannot bin NaN".into()));
        }
        if v < edges[0] {
            h.below += 1;
        } else if v >= edges[edges.len() - 1] {
            h.above += 1;
        } else {
            // First edge strictly greater than v closes v's bin.
            let upper = edges.partition_point(|&e| e <= v);
            h.counts[upper - 1] += 1;
        }
    }
    Ok(h)
}

/// Bin sentences by their Zipf-scale score.
pub fn bin_histogram(scores: &[SentenceScore], edges: &[f64]) -> Result<Histogram> {
    let values: Vec<f64> = scores.iter().map(|s| s.zipf_sfreq).collect();
    bin_values(&values, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table() -> FrequencyTable {
        FrequencyTable::from_counts([("the", 2), ("cat", 1), ("sat", 1)], "D").unwrap()
    }

    fn score(text: &str) -> Result<SentenceScore> {
        sentence_frequency(text, &table(), &SmoothingPolicy::default(), &TokenizerConfig::default())
    }

    #[test]
    fn word_frequency_examples() {
        let t = table();
        assert_eq!(word_frequency("the", &t).unwrap(), 0.5);
        assert_eq!(word_frequency("cat", &t).unwrap(), 0.25);
        assert_eq!(word_frequency("zebra", &t).unwrap(), 0.0);
        assert!(matches!(word_frequency("the", &FrequencyTable::empty("x")), Err(Error::EmptyTable)));
    }

    #[test]
    fn zipf_scale_examples() {
        assert_relative_eq!(zipf_scale(1e-6).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(zipf_scale(1.0).unwrap(), 9.0);
        assert_relative_eq!(zipf_scale(1e-9).unwrap(), 0.0, epsilon = 1e-12);
        assert!(matches!(zipf_scale(0.0), Err(Error::Domain(_))));
        assert!(matches!(zipf_scale(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_token_sentence() {
        let s = score("cat").unwrap();
        assert_eq!(s.token_count, 1);
        assert_eq!(s.log_sfreq, 0.25f64.ln());
    }

    #[test]
    fn two_token_geometric_mean() {
        let s = score("the cat").unwrap();
        assert_relative_eq!(s.log_sfreq, (0.5f64.ln() + 0.25f64.ln()) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(s.log_sfreq, 0.125f64.sqrt().ln(), epsilon = 1e-15);
        assert_relative_eq!(s.zipf_sfreq, 0.125f64.sqrt().log10() + 9.0, epsilon = 1e-12);
    }

    #[test]
    fn position_unaware() {
        let a = score("the cat").unwrap();
        let b = score("cat the").unwrap();
        assert_eq!(a.log_sfreq, b.log_sfreq);
        assert_eq!(a.token_count, b.token_count);
    }

    #[test]
    fn empty_sentence_rejected() {
        assert!(matches!(score(""), Err(Error::EmptySentence)));
        assert!(matches!(score("?!"), Err(Error::EmptySentence)));
    }

    #[test]
    fn oov_uses_floor_without_touching_table() {
        let t = table();
        let s = score("zebra").unwrap();
        assert_eq!(s.log_sfreq, 1e-9f64.ln());
        assert!(!t.contains("zebra"));
        assert_eq!(t.count("zebra"), 0.0);
    }

    #[test]
    fn floor_must_be_positive() {
        assert!(SmoothingPolicy::new(0.0).is_err());
        assert!(SmoothingPolicy::new(-1.0).is_err());
        assert!(SmoothingPolicy::new(f64::NAN).is_err());
        assert!(SmoothingPolicy::default().preserve_raw_zero());
    }

    #[test]
    fn histogram_examples() {
        let edges = [1.0, 1.5, 2.0, 2.5];
        let h = bin_values(&[1.2, 1.7, 2.1], &edges).unwrap();
        assert_eq!(h.counts, [1, 1, 1]);
        let h = bin_values(&[], &edges).unwrap();
        assert_eq!(h.counts, [0, 0, 0]);
        let h = bin_values(&[1.5], &edges).unwrap();
        assert_eq!(h.counts, [0, 1, 0]);
        let h = bin_values(&[0.3, 2.5, 9.0, 1.0], &edges).unwrap();
        assert_eq!((h.below, h.above, h.counts.clone()), (1, 2, vec![1, 0, 0]));
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn histogram_rejects_bad_edges() {
        assert!(bin_values(&[], &[1.0]).is_err());
        assert!(bin_values(&[], &[1.0, 1.0]).is_err());
        assert!(bin_values(&[], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn zipf_scale_inverse_identity() {
        let mut x = 1e-12;
        while x <= 1.0 {
            let back = zipf_to_relative(zipf_scale(x).unwrap());
            assert!(((back - x) / x).abs() <= 1e-12, "{x}");
            x *= 1.37;
        }
    }
}
