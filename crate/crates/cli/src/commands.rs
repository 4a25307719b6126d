use std::collections::HashMap;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use textfreq::distill::{distill_corpus, CombineConfig, CombinedTable, DistillOptions};
use textfreq::freq::{bin_histogram, WordFrequency};
use textfreq::ingest::{import_zipf_list, ingest_corpus, load_table, save_table, CorpusFormat};
use textfreq::policy::{order_curriculum, select_extremes, select_max, OrderingMode, ParaphraseSet, TrainingInstance};
use textfreq::provider::{HttpConfig, HttpProvider, MockProvider, ProviderKind};
use textfreq::tfpd::{self, Pipeline, PipelineConfig, SourceRecord};
use textfreq::theory::{self, build_perturbed, semilog_fit, write_semilog_rows, Epsilon, TheoryConfig, ZipfModel};
use textfreq::{SentenceScore, SentenceScorer, SmoothingPolicy, TokenizerConfig};

use crate::io::{echo_config, emit, open_input, read_jsonl, read_lines, write_jsonl};
use crate::{
    BuildTableArgs, ChecksFailed, CliResult, Command, DistillArgs, ImportZipfArgs, InputFormat, PipelineAction,
    PipelineArgs, ProviderArgs, ProviderChoice, ScoreArgs, ScorerArgs, SelectArgs, SortArgs, SortMode, StatsArgs,
    UsageError, VerifyTheoryArgs,
};

pub fn run(command: Command) -> CliResult {
    match command {
        Command::BuildTable(a) => build_table(a),
        Command::ImportZipf(a) => import_zipf(a),
        Command::Score(a) => score(a, "score"),
        Command::CombineScore(a) => {
            if a.scorer.distilled.is_none() {
                return Err(UsageError("combine-score requires --distilled".into()).into());
            }
            score(a, "combine-score")
        }
        Command::Select(a) => select(a, false),
        Command::Extremes(a) => select(a, true),
        Command::Distill(a) => distill(a),
        Command::Sort(a) => sort(a),
        Command::Pipeline(a) => pipeline(a),
        Command::VerifyTheory(a) => verify_theory(a),
        Command::Stats(a) => stats(a),
    }
}

fn tokenizer(keep_case: bool) -> TokenizerConfig {
    TokenizerConfig { lowercase: !keep_case }
}

fn worker_threads(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn summary(value: Value) -> CliResult {
    println!("{value}");
    Ok(())
}

fn build_table(a: BuildTableArgs) -> CliResult {
    let threads = worker_threads(a.threads);
    echo_config("build-table", &json!({ "args": &a, "threads": threads }));
    let format = match a.format {
        InputFormat::Lines => CorpusFormat::Lines,
        InputFormat::Jsonl => CorpusFormat::JsonLines,
    };
    let report = ingest_corpus(open_input(&a.input)?, format, &tokenizer(a.keep_case), &a.label, threads)?;
    save_table(&report.table, &a.output)?;
    summary(json!({
        "records": report.records,
        "skipped": report.skipped,
        "entries": report.table.len(),
        "total": report.table.total(),
        "output": a.output,
    }))
}

fn import_zipf(a: ImportZipfArgs) -> CliResult {
    echo_config("import-zipf", &a);
    let table = import_zipf_list(open_input(&a.input)?, &a.input, a.virtual_total, &a.label)?;
    save_table(&table, &a.output)?;
    summary(json!({ "entries": table.len(), "total": table.total(), "output": a.output }))
}

/// Word frequencies from the reference table, optionally blended with a distilled one.
fn frequency_source(a: &ScorerArgs) -> Result<Box<dyn WordFrequency + Send + Sync>, Box<dyn std::error::Error>> {
    let Some(table_path) = &a.table else {
        return Err(UsageError("--table is required".into()).into());
    };
    let base = load_table(table_path)?;
    Ok(match &a.distilled {
        None => Box::new(base),
        Some(d) => Box::new(CombinedTable::new(
            base,
            load_table(d)?,
            CombineConfig::new(a.alpha, a.beta, a.zeta)?,
        )),
    })
}

type Scorer = SentenceScorer<Box<dyn WordFrequency + Send + Sync>>;

fn scorer(a: &ScorerArgs) -> Result<Scorer, Box<dyn std::error::Error>> {
    Ok(SentenceScorer {
        source: frequency_source(a)?,
        smoothing: SmoothingPolicy::new(a.floor)?,
        tokenizer: tokenizer(a.keep_case),
    })
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    text: &'a str,
    tokens: usize,
    log_sfreq: f64,
    zipf_sfreq: f64,
}

impl<'a> From<&'a SentenceScore> for ScoreLine<'a> {
    fn from(s: &'a SentenceScore) -> Self {
        Self {
            text: &s.text,
            tokens: s.token_count,
            log_sfreq: s.log_sfreq,
            zipf_sfreq: s.zipf_sfreq,
        }
    }
}

fn score(a: ScoreArgs, name: &str) -> CliResult {
    echo_config(name, &a);
    let sentences = match (&a.text, &a.input) {
        (Some(t), None) => vec![t.clone()],
        (None, Some(p)) => read_lines(p)?,
        _ => return Err(UsageError("give exactly one of --text or --input".into()).into()),
    };
    let scorer = scorer(&a.scorer)?;
    let scores = sentences
        .iter()
        .map(|s| scorer.score(s))
        .collect::<textfreq::Result<Vec<_>>>()?;
    let lines: Vec<ScoreLine> = scores.iter().map(ScoreLine::from).collect();
    emit(a.output.as_deref(), |w| write_jsonl(w, &lines))?;
    Ok(())
}

#[derive(Deserialize)]
struct SetRecord {
    id: String,
    candidates: Vec<String>,
}

fn select(a: SelectArgs, extremes: bool) -> CliResult {
    echo_config(if extremes { "extremes" } else { "select" }, &a);
    let scorer = scorer(&a.scorer)?;
    let sets: Vec<SetRecord> = read_jsonl(&a.input)?;
    let mut out = Vec::with_capacity(sets.len());
    for rec in sets {
        let set = ParaphraseSet::new(rec.id, rec.candidates)?;
        let score = |t: &str| scorer.score(t);
        out.push(if extremes {
            let e = select_extremes(&set, score)?;
            json!({
                "id": set.id,
                "low_index": e.low.index,
                "low_text": set.candidates[e.low.index],
                "low_log_sfreq": e.low.score.log_sfreq,
                "high_index": e.high.index,
                "high_text": set.candidates[e.high.index],
                "high_log_sfreq": e.high.score.log_sfreq,
            })
        } else {
            let s = select_max(&set, score)?;
            json!({
                "id": set.id,
                "index": s.index,
                "text": set.candidates[s.index],
                "log_sfreq": s.score.log_sfreq,
                "zipf_sfreq": s.score.zipf_sfreq,
            })
        });
    }
    emit(a.output.as_deref(), |w| write_jsonl(w, &out))?;
    Ok(())
}

fn provider(a: &ProviderArgs) -> Result<ProviderKind, Box<dyn std::error::Error>> {
    Ok(match a.provider {
        ProviderChoice::Mock => {
            let path = a
                .fixtures
                .as_ref()
                .ok_or_else(|| UsageError("the mock provider needs --fixtures".into()))?;
            ProviderKind::Mock(MockProvider::load(path)?)
        }
        ProviderChoice::Http => {
            let (Some(url), Some(model)) = (&a.base_url, &a.model) else {
                return Err(UsageError("the http provider needs --base-url and --model".into()).into());
            };
            let mut cfg = HttpConfig::new(url.clone(), model.clone());
            cfg.max_retries = a.max_retries;
            ProviderKind::Http(HttpProvider::from_env(cfg)?)
        }
    })
}

#[derive(Deserialize)]
struct TextLine {
    text: String,
}

fn distill(a: DistillArgs) -> CliResult {
    echo_config("distill", &a);
    let texts: Vec<String> = match a.format {
        InputFormat::Lines => read_lines(&a.input)?,
        InputFormat::Jsonl => read_jsonl::<TextLine>(&a.input)?.into_iter().map(|t| t.text).collect(),
    };
    let provider = provider(&a.provider)?;
    let opts = DistillOptions {
        completions_per_text: a.completions_per_text,
        parallelism: a.provider.parallelism,
        max_output_tokens: a.provider.max_tokens,
        temperature: a.provider.temperature,
        tokenizer: tokenizer(a.keep_case),
        label: a.label.clone(),
    };
    let outcome = distill_corpus(&texts, &provider, &opts)?;
    save_table(&outcome.table, &a.output)?;
    summary(json!({
        "requested": outcome.requested,
        "skipped": outcome.skipped,
        "failed_texts": outcome.failures.iter().map(|(i, _)| *i).collect::<Vec<_>>(),
        "entries": outcome.table.len(),
        "total": outcome.table.total(),
        "label": outcome.table.label(),
        "output": a.output,
    }))
}

#[derive(Deserialize)]
struct ScoreRecord {
    id: String,
    score: f64,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn sort(a: SortArgs) -> CliResult {
    echo_config("sort", &a);
    let records: Vec<Value> = read_jsonl(&a.data)?;
    let mut instances = Vec::with_capacity(records.len());
    let mut by_id: HashMap<String, &Value> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        let id = rec
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| UsageError(format!("record {} of {} has no string id", i + 1, a.data.display())))?;
        if by_id.insert(id.to_owned(), rec).is_some() {
            return Err(UsageError(format!("duplicate id {id} in {}", a.data.display())).into());
        }
        let text = rec.get(&a.text_field).and_then(Value::as_str).unwrap_or_default();
        instances.push(TrainingInstance {
            id: id.to_owned(),
            input_text: text.to_owned(),
            payload: Value::Null,
        });
    }
    let scores: HashMap<String, f64> = match &a.scores {
        Some(p) => read_jsonl::<ScoreRecord>(p)?.into_iter().map(|r| (r.id, r.score)).collect(),
        None => {
            if matches!(a.mode, SortMode::External) {
                return Err(UsageError("--mode external needs --scores".into()).into());
            }
            let scorer = scorer(&a.scorer)?;
            instances
                .iter()
                .map(|inst| Ok((inst.id.clone(), scorer.score(&inst.input_text)?.log_sfreq)))
                .collect::<textfreq::Result<_>>()?
        }
    };
    let mode = match a.mode {
        SortMode::Ascending => OrderingMode::AscendingFrequency,
        SortMode::Descending => OrderingMode::DescendingFrequency,
        SortMode::External => OrderingMode::ExternalKey(scores.clone()),
    };
    let order = order_curriculum(&instances, &scores, &mode)?;
    let data_path = sibling(&a.output, ".data.jsonl");
    emit(Some(&data_path), |w| {
        for r in &order {
            serde_json::to_writer(&mut *w, by_id[&r.id])?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    emit(Some(&a.output), |w| textfreq::policy::write_order(&order, w))?;
    summary(json!({ "instances": order.len(), "order": a.output, "data": data_path }))
}

fn pipeline(a: PipelineArgs) -> CliResult {
    echo_config("pipeline", &a);
    let cfg = PipelineConfig {
        annotators: a.annotators.clone(),
        seed: a.seed,
    };
    let p = Pipeline::open(&a.dir, &cfg)?;
    match a.action {
        PipelineAction::Serve { host, port } => {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async {
                let listener = tfpd::server::bind(SocketAddr::new(host, port)).await?;
                println!("{}", json!({ "listening": listener.local_addr()?.to_string() }));
                std::io::stdout().flush()?;
                tfpd::server::serve_on(Arc::new(p), listener).await?;
                Ok::<_, Box<dyn std::error::Error>>(())
            })
        }
        PipelineAction::Ingest {
            source,
            scorer: scorer_args,
            provider: provider_args,
        } => {
            let sources: Vec<SourceRecord> = read_jsonl(&source)?;
            let scorer = scorer(&scorer_args)?;
            let provider = provider(&provider_args)?;
            let s = p.ingest(&sources, &provider, |t| scorer.score(t), provider_args.parallelism)?;
            summary(json!({ "ingest": s, "progress": p.progress() }))
        }
        PipelineAction::Export { dest } => {
            let s = p.export(&dest)?;
            summary(serde_json::to_value(s)?)
        }
        PipelineAction::Progress => summary(serde_json::to_value(p.progress())?),
    }
}

fn verify_theory(a: VerifyTheoryArgs) -> CliResult {
    echo_config("verify-theory", &a);
    let cfg = TheoryConfig {
        s: a.s,
        vocab: a.vocab,
        eps: a.eps,
        lambda: a.lambda,
        trials: a.trials,
        seed: a.seed,
        max_sentence_len: a.max_len,
    };
    let records = theory::run_suite(&cfg)?;
    emit(a.output.as_deref(), |w| write_jsonl(w, &records))?;
    if let Some(path) = &a.semilog {
        let model = build_perturbed(&ZipfModel::new(a.s, a.vocab)?, &Epsilon::Uniform(a.eps), a.seed)?;
        let fit = semilog_fit(&model)?;
        emit(Some(path), |w| write_semilog_rows(&fit, w))?;
    }
    let failed: Vec<&str> = records.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(ChecksFailed(format!("checks with violations: {}", failed.join(", "))).into())
    }
}

fn stats(a: StatsArgs) -> CliResult {
    echo_config("stats", &a);
    let scorer = scorer(&a.scorer)?;
    let scores = read_lines(&a.input)?
        .iter()
        .map(|s| scorer.score(s))
        .collect::<textfreq::Result<Vec<_>>>()?;
    let hist = bin_histogram(&scores, &a.edges)?;
    let n = scores.len();
    let mean = (n > 0).then(|| scores.iter().map(|s| s.zipf_sfreq).sum::<f64>() / n as f64);
    let out = json!({
        "sentences": n,
        "mean_zipf_sfreq": mean,
        "edges": hist.edges,
        "counts": hist.counts,
        "below": hist.below,
        "above": hist.above,
    });
    emit(a.output.as_deref(), |w| {
        serde_json::to_writer(&mut *w, &out)?;
        w.write_all(b"\n")
    })?;
    Ok(())
}
