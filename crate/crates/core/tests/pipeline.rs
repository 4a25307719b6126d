use std::path::{Path, PathBuf};
use std::sync::Arc;

use textfreq::ingest::load_table;
use textfreq::provider::MockProvider;
use textfreq::tfpd::{
    JobStatus, ParaphraseJob, Pipeline, PipelineConfig, SourceRecord, Verdict, JOURNAL_FILE, REJECT_MALFORMED,
    REJECT_PROVIDER,
};
use textfreq::SentenceScorer;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/e2e").join(name)
}

fn sources() -> Vec<SourceRecord> {
    std::fs::read_to_string(data("sources.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn job(n: usize) -> ParaphraseJob {
    ParaphraseJob {
        job_id: 0,
        source_id: format!("s{n:02}"),
        original: format!("original {n}"),
        ground_truth: serde_json::json!({ "answer": n }),
        candidates: (0..20).map(|i| format!("candidate {n} {i}")).collect(),
        low_text: Some(format!("low {n}")),
        high_text: Some(format!("high {n}")),
        low_log_sfreq: Some(-8.0),
        high_log_sfreq: Some(-4.0),
        status: JobStatus::Generated,
        reject_reason: None,
    }
}

const VERDICTS: [Verdict; 3] = [Verdict::Same, Verdict::MaybeSame, Verdict::NotSame];

#[test]
fn all_27_verdict_combinations() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::open(dir.path(), &PipelineConfig::default()).unwrap();
    let mut accepted = Vec::new();
    for (n, (a, b, c)) in itertools::iproduct!(VERDICTS, VERDICTS, VERDICTS).enumerate() {
        let id = p.add_job(job(n)).unwrap();
        p.record_judgment(id, "a1", a, None).unwrap();
        p.record_judgment(id, "a2", b, None).unwrap();
        if p.record_judgment(id, "a3", c, None).unwrap() == JobStatus::Accepted {
            accepted.push((a, b, c));
        }
    }
    assert_eq!(accepted, [(Verdict::Same, Verdict::Same, Verdict::Same)]);
    let prog = p.progress();
    assert_eq!((prog.accepted, prog.rejected, prog.total), (1, 26, 27));
}

#[test]
fn replay_after_crash_keeps_acknowledged_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let mut acked = Vec::new();
    {
        let p = Pipeline::open(dir.path(), &cfg).unwrap();
        for n in 0..4 {
            p.add_job(job(n)).unwrap();
        }
        for (id, ann, v) in [(1, "a1", Verdict::Same), (1, "a2", Verdict::Same), (2, "a3", Verdict::NotSame)] {
            p.record_judgment(id, ann, v, Some("perm-0".into())).unwrap();
            acked.push((id, ann.to_owned(), v));
        }
        // Dropped without any shutdown step.
    }
    // A write that was torn mid-line and never acknowledged.
    let journal = dir.path().join(JOURNAL_FILE);
    let mut bytes = std::fs::read(&journal).unwrap();
    bytes.extend_from_slice(br#"{"event":"judgment","judgment":{"job_id":1,"annot"#);
    std::fs::write(&journal, bytes).unwrap();

    let p = Pipeline::open(dir.path(), &cfg).unwrap();
    for (id, ann, v) in &acked {
        let js = p.judgments(*id);
        let j = js.iter().find(|j| &j.annotator == ann).expect("judgment lost");
        assert_eq!(j.verdict, *v);
    }
    assert_eq!(p.job(1).unwrap().status, JobStatus::InAnnotation);
    assert_eq!(p.progress().total, 4);
    // New ids continue after the replayed ones.
    assert_eq!(p.add_job(job(9)).unwrap(), 5);
    assert_eq!(p.record_judgment(1, "a3", Verdict::Same, None).unwrap(), JobStatus::Accepted);

    drop(p);
    let p = Pipeline::open(dir.path(), &cfg).unwrap();
    assert_eq!(p.job(1).unwrap().status, JobStatus::Accepted);
    assert_eq!(p.accepted_records().len(), 1);
}

#[test]
fn concurrent_judgments_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        annotators: (0..8).map(|i| format!("ann{i}")).collect(),
        seed: 3,
    };
    let p = Arc::new(Pipeline::open(dir.path(), &cfg).unwrap());
    for n in 0..10 {
        p.add_job(job(n)).unwrap();
    }
    std::thread::scope(|s| {
        for ann in &cfg.annotators {
            let p = Arc::clone(&p);
            s.spawn(move || {
                while let Some(item) = p.next_item(ann).unwrap() {
                    p.record_judgment(item.job_id, ann, Verdict::Same, Some(item.permutation)).unwrap();
                }
            });
        }
    });
    assert_eq!(p.progress().accepted, 10);
    drop(p);
    let p = Pipeline::open(dir.path(), &cfg).unwrap();
    assert_eq!(p.progress().accepted, 10);
}

#[test]
fn end_to_end_mock_run_matches_golden_export() {
    let table = load_table(&data("reference.tfl")).unwrap();
    let scorer = SentenceScorer::new(&table);
    let provider = MockProvider::load(&data("mock_fixture.tsv")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::open(dir.path(), &PipelineConfig::default()).unwrap();

    let summary = p.ingest(&sources(), &provider, |s| scorer.score(s), 3).unwrap();
    assert_eq!(summary.job_ids, [1, 2, 3, 4, 5]);
    assert_eq!((summary.generated, summary.rejected), (3, 2));
    assert_eq!(p.job(3).unwrap().reject_reason.as_deref(), Some(REJECT_MALFORMED));
    assert_eq!(p.job(5).unwrap().reject_reason.as_deref(), Some(REJECT_PROVIDER));

    let expected: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(data("expected_extremes.json")).unwrap()).unwrap();
    for e in &expected {
        let job = p.jobs().into_iter().find(|j| j.source_id == e["source_id"]).unwrap();
        assert_eq!(job.status, JobStatus::Generated);
        assert_eq!(job.candidates.len(), 20);
        assert_eq!(job.high_text.as_deref(), e["high_text"].as_str());
        assert_eq!(job.low_text.as_deref(), e["low_text"].as_str());
        assert_eq!(job.candidates[e["high_index"].as_u64().unwrap() as usize], e["high_text"]);
        assert!(job.high_log_sfreq.unwrap() > job.low_log_sfreq.unwrap());
    }

    for ann in ["a1", "a2", "a3"] {
        while let Some(item) = p.next_item(ann).unwrap() {
            let source = p.job(item.job_id).unwrap().source_id;
            let verdict = if source == "gsm-002" && ann == "a2" {
                Verdict::MaybeSame
            } else {
                Verdict::Same
            };
            p.record_judgment(item.job_id, ann, verdict, Some(item.permutation)).unwrap();
        }
    }
    let prog = p.progress();
    assert_eq!((prog.accepted, prog.rejected), (2, 3));

    let dest = dir.path().join("tfpd.jsonl");
    let exported = p.export(&dest).unwrap();
    assert_eq!(exported.records, 2);
    assert_eq!(
        std::fs::read_to_string(&dest).unwrap(),
        std::fs::read_to_string(data("golden_export.jsonl")).unwrap()
    );
    assert_eq!(exported.stats.high.count, 2);
    // "Tom has 3 apples and buys 2 more." and "Mary reads 5 pages of her book on monday."
    assert_eq!(exported.stats.high.mean, Some(8.5));
    assert_eq!((exported.stats.high.min, exported.stats.high.max), (Some(8), Some(9)));

    // Ground truth comes through untouched and every pair is ordered.
    for r in p.accepted_records() {
        let src = sources().into_iter().find(|s| s.id == r.source_id).unwrap();
        assert_eq!(r.ground_truth, src.ground_truth);
        assert!(scorer.score(&r.high_text).unwrap().log_sfreq >= scorer.score(&r.low_text).unwrap().log_sfreq);
    }
}

#[test]
fn ingest_is_deterministic_across_parallelism() {
    let table = load_table(&data("reference.tfl")).unwrap();
    let scorer = SentenceScorer::new(&table);
    let provider = MockProvider::load(&data("mock_fixture.tsv")).unwrap();
    let run = |par| {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::open(dir.path(), &PipelineConfig::default()).unwrap();
        p.ingest(&sources(), &provider, |s| scorer.score(s), par).unwrap();
        p.jobs()
    };
    assert_eq!(run(1), run(5));
}
