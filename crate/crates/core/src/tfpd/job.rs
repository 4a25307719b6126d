use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::SentenceScore;
use crate::policy::{select_extremes, ParaphraseSet};
use crate::provider::{CompletionProvider, CompletionRequest};

pub const PARAPHRASE_COUNT: usize = 20;
pub const PARAPHRASE_DELIMITER: &str = "||||";

const PARAPHRASE_TEMPLATE: &str = "My goal is to transform the original sentence into both more common and less common expressions.
Note: Do not omit any words such as verbs, adjectives, nouns, or adverbs.
You must generate two types of sentences:
(1) ten sentences using less common, more complex words.
(2) ten sentences using more common, simpler words.
Return all 20 sentences directly, separated by |||| and do not use numbering.
Original sentence: {sentence}";

pub fn paraphrase_prompt(sentence: &str) -> String {
    PARAPHRASE_TEMPLATE.replace("{sentence}", sentence)
}

pub const REJECT_MALFORMED: &str = "malformed-generation";
pub const REJECT_PROVIDER: &str = "provider-error";
pub const REJECT_UNSCOREABLE: &str = "unscoreable-candidate";
pub const REJECT_DEGENERATE: &str = "identical-extremes";

/// A source dataset record: the sentence to paraphrase plus its reference answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub ground_truth: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobStatus {
    Generated,
    InAnnotation,
    Accepted,
    Rejected,
}

impl JobStatus {
    pub fn is_final(self) -> bool {
        matches!(self, JobStatus::Accepted | JobStatus::Rejected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Same,
    MaybeSame,
    NotSame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseJob {
    /// Assigned by the pipeline when the job is added; 0 before that.
    pub job_id: u64,
    pub source_id: String,
    pub original: String,
    #[serde(default)]
    pub ground_truth: serde_json::Value,
    pub candidates: Vec<String>,
    pub low_text: Option<String>,
    pub high_text: Option<String>,
    pub low_log_sfreq: Option<f64>,
    pub high_log_sfreq: Option<f64>,
    pub status: JobStatus,
    pub reject_reason: Option<String>,
}

impl ParaphraseJob {
    fn rejected(source: &SourceRecord, candidates: Vec<String>, reason: &str) -> Self {
        Self {
            job_id: 0,
            source_id: source.id.clone(),
            original: source.text.clone(),
            ground_truth: source.ground_truth.clone(),
            candidates,
            low_text: None,
            high_text: None,
            low_log_sfreq: None,
            high_log_sfreq: None,
            status: JobStatus::Rejected,
            reject_reason: Some(reason.to_owned()),
        }
    }
}

/// Split a completion on `||||` and keep the trimmed parts. `None` unless
/// there are exactly 20 non-empty parts.
pub fn split_paraphrases(completion: &str) -> Option<Vec<String>> {
    let parts: Vec<String> = completion
        .split(PARAPHRASE_DELIMITER)
        .map(|p| p.trim().to_owned())
        .collect();
    (parts.len() == PARAPHRASE_COUNT && parts.iter().all(|p| !p.is_empty())).then_some(parts)
}

/// Turn a provider result into a job: split, score, and pick the extreme pair.
pub fn job_from_completion<F>(source: &SourceRecord, completion: Result<String>, scorer: F) -> ParaphraseJob
where
    F: FnMut(&str) -> Result<SentenceScore>,
{
    let completion = match completion {
        Ok(c) => c,
        Err(e) => {
            tracing::warn!(source = %source.id, error = %e, "paraphrase generation failed");
            return ParaphraseJob::rejected(source, Vec::new(), REJECT_PROVIDER);
        }
    };
    let Some(candidates) = split_paraphrases(&completion) else {
        return ParaphraseJob::rejected(source, Vec::new(), REJECT_MALFORMED);
    };
    let set = ParaphraseSet {
        id: source.id.clone(),
        candidates,
    };
    let extremes = match select_extremes(&set, scorer) {
        Ok(e) => e,
        Err(e) => {
            tracing::warn!(source = %source.id, error = %e, "could not score paraphrases");
            return ParaphraseJob::rejected(source, set.candidates, REJECT_UNSCOREABLE);
        }
    };
    let low = set.candidates[extremes.low.index].clone();
    let high = set.candidates[extremes.high.index].clone();
    if low == high {
        return ParaphraseJob::rejected(source, set.candidates, REJECT_DEGENERATE);
    }
    ParaphraseJob {
        job_id: 0,
        source_id: source.id.clone(),
        original: source.text.clone(),
        ground_truth: source.ground_truth.clone(),
        candidates: set.candidates,
        low_text: Some(low),
        high_text: Some(high),
        low_log_sfreq: Some(extremes.low.score.log_sfreq),
        high_log_sfreq: Some(extremes.high.score.log_sfreq),
        status: JobStatus::Generated,
        reject_reason: None,
    }
}

pub fn generate_job<F>(
    source: &SourceRecord,
    provider: &dyn CompletionProvider,
    scorer: F,
) -> Result<ParaphraseJob>
where
    F: FnMut(&str) -> Result<SentenceScore>,
{
    if source.text.trim().is_empty() {
        return Err(Error::Precondition(format!("source {} has an empty sentence", source.id)));
    }
    let request = CompletionRequest::new(paraphrase_prompt(&source.text))?;
    Ok(job_from_completion(source, provider.complete(&request), scorer))
}
