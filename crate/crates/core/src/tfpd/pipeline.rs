use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::export::{export_records, ExportSummary, TfpdRecord};
use super::job::{job_from_completion, paraphrase_prompt, JobStatus, ParaphraseJob, SourceRecord, Verdict};
use super::journal::Journal;
use crate::error::{Error, Result};
use crate::freq::SentenceScore;
use crate::provider::{complete_batch, CompletionProvider, CompletionRequest};

pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub annotators: Vec<String>,
    /// Seed for the blind presentation order.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            annotators: vec!["a1".into(), "a2".into(), "a3".into()],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub job_id: u64,
    pub annotator: String,
    pub verdict: Verdict,
    /// Unix time in milliseconds.
    pub timestamp: u64,
    /// Presentation-order token the annotator saw, when the client sends one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Open { annotators: Vec<String> },
    Job { job: ParaphraseJob },
    Judgment { judgment: Judgment },
}

/// What an annotator sees: three unlabeled sentences in shuffled order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub job_id: u64,
    pub sentences: Vec<String>,
    pub permutation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub generated: usize,
    pub in_annotation: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub generated: usize,
    pub rejected: usize,
    pub job_ids: Vec<u64>,
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Position `i` of the served triple shows field `perm[i]` (0 original, 1 low, 2 high).
pub fn decode_permutation(token: &str) -> Option<[usize; 3]> {
    let k: usize = token.strip_prefix("perm-")?.parse().ok()?;
    PERMUTATIONS.get(k).copied()
}

struct JobEntry {
    job: ParaphraseJob,
    judgments: BTreeMap<String, Judgment>,
}

struct State {
    annotators: Vec<String>,
    jobs: BTreeMap<u64, JobEntry>,
    next_id: u64,
    journal: Journal,
    rng: ChaCha8Rng,
}

impl State {
    fn apply_job(&mut self, mut job: ParaphraseJob) {
        if job.job_id == 0 {
            job.job_id = self.next_id;
        }
        self.next_id = self.next_id.max(job.job_id + 1);
        self.jobs.insert(
            job.job_id,
            JobEntry {
                job,
                judgments: BTreeMap::new(),
            },
        );
    }

    fn validate_judgment(&self, job_id: u64, annotator: &str) -> Result<()> {
        if !self.annotators.iter().any(|a| a == annotator) {
            return Err(Error::UnknownAnnotator(annotator.to_owned()));
        }
        let entry = self.jobs.get(&job_id).ok_or(Error::JobNotFound(job_id))?;
        if entry.job.status.is_final() {
            return Err(Error::JobFinalized(job_id));
        }
        Ok(())
    }

    fn apply_judgment(&mut self, j: Judgment) -> JobStatus {
        let n_annotators = self.annotators.len();
        let entry = self.jobs.get_mut(&j.job_id).expect("validated");
        entry.judgments.insert(j.annotator.clone(), j);
        entry.job.status = if entry.judgments.len() < n_annotators {
            JobStatus::InAnnotation
        } else if entry.judgments.values().all(|j| j.verdict == Verdict::Same) {
            JobStatus::Accepted
        } else {
            JobStatus::Rejected
        };
        entry.job.status
    }
}

/// Annotation workflow over a journaled set of paraphrase jobs.
///
/// All writes go through one mutex, so judgments are serialized; each is
/// synced to the journal before it is applied and acknowledged.
pub struct Pipeline {
    state: Mutex<State>,
    dir: PathBuf,
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Pipeline {
    /// Open the pipeline state in `dir`, replaying its journal.
    pub fn open(dir: &Path, config: &PipelineConfig) -> Result<Self> {
        if config.annotators.is_empty() {
            return Err(Error::Config("at least one annotator is required".into()));
        }
        let mut sorted = config.annotators.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != config.annotators.len() {
            return Err(Error::Config("annotator ids must be unique".into()));
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (journal, events) = Journal::open::<Event>(&dir.join(JOURNAL_FILE))?;
        let mut state = State {
            annotators: config.annotators.clone(),
            jobs: BTreeMap::new(),
            next_id: 1,
            journal,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let mut opened = false;
        for (i, ev) in events.into_iter().enumerate() {
            let corrupt = |message: String| Error::Journal {
                path: state.journal.path().to_owned(),
                line: i + 1,
                message,
            };
            match ev {
                Event::Open { annotators } => {
                    if annotators != config.annotators {
                        return Err(Error::Config(format!(
                            "journal was created for annotators {annotators:?}, not {:?}",
                            config.annotators
                        )));
                    }
                    opened = true;
                }
                Event::Job { job } => state.apply_job(job),
                Event::Judgment { judgment } => {
                    state
                        .validate_judgment(judgment.job_id, &judgment.annotator)
                        .map_err(|e| corrupt(e.to_string()))?;
                    state.apply_judgment(judgment);
                }
            }
        }
        if !opened {
            state.journal.append(&Event::Open {
                annotators: config.annotators.clone(),
            })?;
        }
        Ok(Self {
            state: Mutex::new(state),
            dir: dir.to_owned(),
        })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn annotators(&self) -> Vec<String> {
        self.lock().annotators.clone()
    }

    /// Journal and add a generated (or generation-rejected) job; returns its id.
    pub fn add_job(&self, job: ParaphraseJob) -> Result<u64> {
        let mut st = self.lock();
        let mut job = job;
        job.job_id = st.next_id;
        st.journal.append(&Event::Job { job: job.clone() })?;
        let id = job.job_id;
        st.apply_job(job);
        Ok(id)
    }

    /// Generate paraphrase jobs for every source record and add them in input order.
    pub fn ingest<F>(
        &self,
        sources: &[SourceRecord],
        provider: &dyn CompletionProvider,
        mut scorer: F,
        parallelism: usize,
    ) -> Result<IngestSummary>
    where
        F: FnMut(&str) -> Result<SentenceScore>,
    {
        let requests = sources
            .iter()
            .map(|s| {
                if s.text.trim().is_empty() {
                    return Err(Error::Precondition(format!("source {} has an empty sentence", s.id)));
                }
                CompletionRequest::new(paraphrase_prompt(&s.text))
            })
            .collect::<Result<Vec<_>>>()?;
        let completions = complete_batch(&requests, provider, parallelism)?;
        let mut summary = IngestSummary::default();
        for (source, completion) in sources.iter().zip(completions) {
            let job = job_from_completion(source, completion, &mut scorer);
            match job.status {
                JobStatus::Rejected => summary.rejected += 1,
                _ => summary.generated += 1,
            }
            summary.job_ids.push(self.add_job(job)?);
        }
        Ok(summary)
    }

    /// Oldest open job this annotator has not judged, in a fresh random order.
    pub fn next_item(&self, annotator: &str) -> Result<Option<AnnotationItem>> {
        let mut st = self.lock();
        if !st.annotators.iter().any(|a| a == annotator) {
            return Err(Error::UnknownAnnotator(annotator.to_owned()));
        }
        let found = st
            .jobs
            .values()
            .find(|e| !e.job.status.is_final() && !e.judgments.contains_key(annotator))
            .map(|e| {
                (
                    e.job.job_id,
                    [
                        e.job.original.clone(),
                        e.job.low_text.clone().unwrap_or_default(),
                        e.job.high_text.clone().unwrap_or_default(),
                    ],
                )
            });
        let Some((job_id, fields)) = found else {
            return Ok(None);
        };
        let mut order: Vec<usize> = (0..PERMUTATIONS.len()).collect();
        order.shuffle(&mut st.rng);
        let k = order[0];
        let perm = PERMUTATIONS[k];
        Ok(Some(AnnotationItem {
            job_id,
            sentences: perm.iter().map(|&f| fields[f].clone()).collect(),
            permutation: format!("perm-{k}"),
        }))
    }

    /// Store a verdict; the job is finalized once every annotator has judged
    /// it. Resubmission before that replaces the earlier verdict.
    pub fn record_judgment(
        &self,
        job_id: u64,
        annotator: &str,
        verdict: Verdict,
        permutation: Option<String>,
    ) -> Result<JobStatus> {
        let judgment = Judgment {
            job_id,
            annotator: annotator.to_owned(),
            verdict,
            timestamp: now_millis(),
            permutation,
        };
        let mut st = self.lock();
        st.validate_judgment(job_id, annotator)?;
        st.journal.append(&Event::Judgment {
            judgment: judgment.clone(),
        })?;
        Ok(st.apply_judgment(judgment))
    }

    pub fn progress(&self) -> Progress {
        let st = self.lock();
        let mut p = Progress::default();
        for e in st.jobs.values() {
            match e.job.status {
                JobStatus::Generated => p.generated += 1,
                JobStatus::InAnnotation => p.in_annotation += 1,
                JobStatus::Accepted => p.accepted += 1,
                JobStatus::Rejected => p.rejected += 1,
            }
        }
        p.total = st.jobs.len();
        p
    }

    pub fn job(&self, job_id: u64) -> Option<ParaphraseJob> {
        self.lock().jobs.get(&job_id).map(|e| e.job.clone())
    }

    pub fn jobs(&self) -> Vec<ParaphraseJob> {
        self.lock().jobs.values().map(|e| e.job.clone()).collect()
    }

    pub fn judgments(&self, job_id: u64) -> Vec<Judgment> {
        self.lock()
            .jobs
            .get(&job_id)
            .map(|e| e.judgments.values().cloned().collect())
            .unwrap_or_default()
    }

    /// Records for accepted jobs, ordered by source id then job id.
    pub fn accepted_records(&self) -> Vec<TfpdRecord> {
        let st = self.lock();
        let mut recs: Vec<(String, u64, TfpdRecord)> = st
            .jobs
            .values()
            .filter(|e| e.job.status == JobStatus::Accepted)
            .map(|e| {
                (
                    e.job.source_id.clone(),
                    e.job.job_id,
                    TfpdRecord {
                        source_id: e.job.source_id.clone(),
                        high_text: e.job.high_text.clone().unwrap_or_default(),
                        low_text: e.job.low_text.clone().unwrap_or_default(),
                        ground_truth: e.job.ground_truth.clone(),
                    },
                )
            })
            .collect();
        recs.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        recs.into_iter().map(|(_, _, r)| r).collect()
    }

    pub fn export(&self, destination: &Path) -> Result<ExportSummary> {
        export_records(&self.accepted_records(), destination)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(source_id: &str) -> ParaphraseJob {
        ParaphraseJob {
            job_id: 0,
            source_id: source_id.into(),
            original: format!("original {source_id}"),
            ground_truth: serde_json::json!(42),
            candidates: (0..20).map(|i| format!("cand {i}")).collect(),
            low_text: Some(format!("low {source_id}")),
            high_text: Some(format!("high {source_id}")),
            low_log_sfreq: Some(-9.0),
            high_log_sfreq: Some(-3.0),
            status: JobStatus::Generated,
            reject_reason: None,
        }
    }

    fn open(dir: &Path) -> Pipeline {
        Pipeline::open(dir, &PipelineConfig::default()).unwrap()
    }

    #[test]
    fn fifo_queue_per_annotator() {
        let dir = tempfile::tempdir().unwrap();
        let p = open(dir.path());
        let j1 = p.add_job(job("s1")).unwrap();
        let j2 = p.add_job(job("s2")).unwrap();
        assert_eq!((j1, j2), (1, 2));

        let item = p.next_item("a1").unwrap().unwrap();
        assert_eq!(item.job_id, j1);
        let mut shown = item.sentences.clone();
        shown.sort();
        assert_eq!(shown, ["high s1", "low s1", "original s1"]);
        let perm = decode_permutation(&item.permutation).unwrap();
        let fields = ["original s1", "low s1", "high s1"];
        for (pos, &f) in perm.iter().enumerate() {
            assert_eq!(item.sentences[pos], fields[f]);
        }

        p.record_judgment(j1, "a1", Verdict::Same, Some(item.permutation)).unwrap();
        assert_eq!(p.next_item("a1").unwrap().unwrap().job_id, j2);
        // a2 walks its own cursor from the start.
        assert_eq!(p.next_item("a2").unwrap().unwrap().job_id, j1);
        p.record_judgment(j2, "a1", Verdict::Same, None).unwrap();
        assert!(p.next_item("a1").unwrap().is_none());
    }

    #[test]
    fn unknown_annotator_and_job() {
        let dir = tempfile::tempdir().unwrap();
        let p = open(dir.path());
        let id = p.add_job(job("s1")).unwrap();
        assert!(matches!(p.next_item("mallory"), Err(Error::UnknownAnnotator(_))));
        assert!(matches!(
            p.record_judgment(id, "mallory", Verdict::Same, None),
            Err(Error::UnknownAnnotator(_))
        ));
        assert!(matches!(p.record_judgment(99, "a1", Verdict::Same, None), Err(Error::JobNotFound(99))));
    }

    #[test]
    fn unanimity_rules() {
        let dir = tempfile::tempdir().unwrap();
        let p = open(dir.path());
        let cases = [
            ([Verdict::Same, Verdict::Same, Verdict::Same], JobStatus::Accepted),
            ([Verdict::Same, Verdict::MaybeSame, Verdict::Same], JobStatus::Rejected),
            ([Verdict::Same, Verdict::Same, Verdict::NotSame], JobStatus::Rejected),
        ];
        for (verdicts, expected) in cases {
            let id = p.add_job(job("s")).unwrap();
            assert_eq!(p.record_judgment(id, "a1", verdicts[0], None).unwrap(), JobStatus::InAnnotation);
            assert_eq!(p.record_judgment(id, "a2", verdicts[1], None).unwrap(), JobStatus::InAnnotation);
            assert_eq!(p.record_judgment(id, "a3", verdicts[2], None).unwrap(), expected);
            assert!(matches!(
                p.record_judgment(id, "a1", Verdict::Same, None),
                Err(Error::JobFinalized(_))
            ));
        }
    }

    #[test]
    fn resubmission_overwrites_before_finalization() {
        let dir = tempfile::tempdir().unwrap();
        let p = open(dir.path());
        let id = p.add_job(job("s")).unwrap();
        p.record_judgment(id, "a1", Verdict::NotSame, None).unwrap();
        p.record_judgment(id, "a1", Verdict::Same, None).unwrap();
        p.record_judgment(id, "a2", Verdict::Same, None).unwrap();
        assert_eq!(p.record_judgment(id, "a3", Verdict::Same, None).unwrap(), JobStatus::Accepted);
        assert_eq!(p.judgments(id).len(), 3);
    }

    #[test]
    fn rejected_jobs_are_final_and_not_served() {
        let dir = tempfile::tempdir().unwrap();
        let p = open(dir.path());
        let mut j = job("bad");
        j.status = JobStatus::Rejected;
        j.reject_reason = Some("malformed-generation".into());
        let id = p.add_job(j).unwrap();
        assert!(p.next_item("a1").unwrap().is_none());
        assert!(matches!(p.record_judgment(id, "a1", Verdict::Same, None), Err(Error::JobFinalized(_))));
        assert_eq!(p.progress().rejected, 1);
    }

    #[test]
    fn annotator_set_is_pinned_by_journal() {
        let dir = tempfile::tempdir().unwrap();
        drop(open(dir.path()));
        let other = PipelineConfig {
            annotators: vec!["x".into()],
            seed: 0,
        };
        assert!(matches!(Pipeline::open(dir.path(), &other), Err(Error::Config(_))));
        assert!(Pipeline::open(
            dir.path(),
            &PipelineConfig {
                annotators: vec![],
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn permutation_tokens() {
        assert_eq!(decode_permutation("perm-0"), Some([0, 1, 2]));
        assert_eq!(decode_permutation("perm-5"), Some([2, 1, 0]));
        assert_eq!(decode_permutation("perm-6"), None);
        assert_eq!(decode_permutation("x"), None);
    }
}
