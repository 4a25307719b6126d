//! Frequency distillation: build a second table from model story
//! completions and blend it with the corpus table at the word level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{SentenceScore, SentenceScorer, SmoothingPolicy, WordFrequency};
use crate::ingest::{FrequencyTable, TableBuilder, TokenizerConfig};
use crate::provider::{complete_batch, CompletionProvider, CompletionRequest};

pub const STORY_COMPLETION_INSTRUCTION: &str = "Please conduct story completion on the following data:";

pub fn story_completion_prompt(text: &str) -> String {
    format!("{STORY_COMPLETION_INSTRUCTION} {text}")
}

#[derive(Debug, Clone)]
pub struct DistillOptions {
    pub completions_per_text: usize,
    pub parallelism: usize,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub tokenizer: TokenizerConfig,
    pub label: String,
}

impl Default for DistillOptions {
    fn default() -> Self {
        Self {
            completions_per_text: 1,
            parallelism: 4,
            max_output_tokens: CompletionRequest::DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: CompletionRequest::DEFAULT_TEMPERATURE,
            tokenizer: TokenizerConfig::default(),
            label: "distilled-D-prime".into(),
        }
    }
}

#[derive(Debug)]
pub struct DistillOutcome {
    pub table: FrequencyTable,
    pub requested: usize,
    pub skipped: usize,
    /// `(text index, error)` for every failed completion.
    pub failures: Vec<(usize, Error)>,
}

fn distilled_label(label: &str) -> String {
    if label.starts_with("distilled-") {
        label.to_owned()
    } else {
        format!("distilled-{label}")
    }
}

/// Ask the provider to continue every training text as a story and count
/// the tokens of all completions into one table.
pub fn distill_corpus<S: AsRef<str>>(
    texts: &[S],
    provider: &dyn CompletionProvider,
    options: &DistillOptions,
) -> Result<DistillOutcome> {
    if texts.is_empty() {
        return Err(Error::Precondition("no texts to distill".into()));
    }
    if options.completions_per_text == 0 {
        return Err(Error::Config("completions_per_text must be at least 1".into()));
    }
    let mut requests = Vec::with_capacity(texts.len() * options.completions_per_text);
    let mut owners = Vec::with_capacity(requests.capacity());
    for (i, t) in texts.iter().enumerate() {
        let prompt = story_completion_prompt(t.as_ref());
        for _ in 0..options.completions_per_text {
            requests.push(CompletionRequest::with_params(
                prompt.clone(),
                options.max_output_tokens,
                options.temperature,
            )?);
            owners.push(i);
        }
    }

    let results = complete_batch(&requests, provider, options.parallelism)?;
    let mut builder = TableBuilder::new();
    let mut failures = Vec::new();
    for (owner, res) in owners.into_iter().zip(results) {
        match res {
            Ok(text) => builder.add_document(&text, &options.tokenizer),
            Err(e) => {
                tracing::warn!(text = owner, error = %e, "story completion failed; skipping");
                failures.push((owner, e));
            }
        }
    }
    if failures.len() == requests.len() {
        return Err(Error::EmptyDistillation(requests.len()));
    }
    Ok(DistillOutcome {
        table: builder.finish(distilled_label(&options.label)),
        requested: requests.len(),
        skipped: failures.len(),
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombineConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Extra weight on the distilled frequency for tokens the base table never saw.
    pub zeta: f64,
}

impl CombineConfig {
    pub fn new(alpha: f64, beta: f64, zeta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("zeta", zeta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if alpha + beta <= 0.0 {
            return Err(Error::Config("alpha + beta must be positive".into()));
        }
        Ok(Self { alpha, beta, zeta })
    }

    /// `alpha*f1 + (1 + zeta*[f1 == 0]) * beta*f2`
    pub fn combine(&self, f1: f64, f2: f64) -> f64 {
        let boost = if f1 == 0.0 { 1.0 + self.zeta } else { 1.0 };
        self.alpha * f1 + boost * self.beta * f2
    }
}

impl Default for CombineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            zeta: 1.0,
        }
    }
}

/// Base table (corpus) and distilled table blended word by word.
#[derive(Debug, Clone)]
pub struct CombinedTable {
    pub base: FrequencyTable,
    pub distilled: FrequencyTable,
    pub config: CombineConfig,
}

impl CombinedTable {
    pub fn new(base: FrequencyTable, distilled: FrequencyTable, config: CombineConfig) -> Self {
        Self {
            base,
            distilled,
            config,
        }
    }

    /// Not a normalized probability in general. An empty table contributes 0.
    pub fn combined_word_frequency(&self, token: &str) -> f64 {
        self.config.combine(
            self.base.relative_or_zero(token),
            self.distilled.relative_or_zero(token),
        )
    }

    pub fn scorer(&self, smoothing: SmoothingPolicy, tokenizer: TokenizerConfig) -> SentenceScorer<&Self> {
        SentenceScorer {
            source: self,
            smoothing,
            tokenizer,
        }
    }
}

impl WordFrequency for CombinedTable {
    fn word_frequency(&self, token: &str) -> Result<f64> {
        Ok(self.combined_word_frequency(token))
    }
}

pub fn combined_word_frequency(token: &str, combined: &CombinedTable) -> f64 {
    combined.combined_word_frequency(token)
}

/// Sentence score with combined word frequencies; the floor applies after combination.
pub fn combined_sentence_frequency(
    text: &str,
    combined: &CombinedTable,
    smoothing: &SmoothingPolicy,
    tokenizer: &TokenizerConfig,
) -> Result<SentenceScore> {
    combined.scorer(*smoothing, *tokenizer).score(text)
}
