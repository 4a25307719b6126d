//! Paired paraphrase dataset construction: generation, extreme-pair
//! extraction, a journaled three-annotator review queue, and export.

mod export;
mod job;
mod journal;
mod pipeline;
pub mod server;

pub use export::{export_records, export_stats, stats_path, ExportStats, ExportSummary, LengthStats, TfpdRecord};
pub use job::{
    generate_job, job_from_completion, paraphrase_prompt, split_paraphrases, JobStatus, ParaphraseJob, SourceRecord,
    Verdict, PARAPHRASE_COUNT, PARAPHRASE_DELIMITER, REJECT_DEGENERATE, REJECT_MALFORMED, REJECT_PROVIDER,
    REJECT_UNSCOREABLE,
};
pub use journal::Journal;
pub use pipeline::{
    decode_permutation, AnnotationItem, IngestSummary, Judgment, Pipeline, PipelineConfig, Progress, JOURNAL_FILE,
};
