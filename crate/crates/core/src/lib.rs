//! Textual-frequency toolkit: corpus frequency tables, sentence-level
//! frequency scoring, paraphrase selection, curriculum ordering, frequency
//! distillation, paired-paraphrase dataset construction, and simulation
//! checks of the Zipf-based loss/frequency bounds.

pub mod distill;
pub mod error;
pub mod freq;
pub mod fsutil;
pub mod ingest;
pub mod policy;
pub mod provider;
pub mod tfpd;
pub mod theory;

pub use error::{Error, Result};
pub use freq::{
    sentence_frequency, word_frequency, zipf_scale, SentenceScore, SentenceScorer, SmoothingPolicy,
    WordFrequency,
};
pub use ingest::{FrequencyTable, TokenizerConfig};
