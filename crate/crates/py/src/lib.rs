//! Python bindings for the frequency tables, sentence scoring, paraphrase
//! selection, curriculum ordering and the Zipf simulation checks.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use textfreq_core as core;
use textfreq_core::distill::{CombineConfig, CombinedTable};
use textfreq_core::policy::{OrderingMode, ParaphraseSet, TrainingInstance};
use textfreq_core::{Error, SentenceScorer, SmoothingPolicy, TokenizerConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::IngestAborted { .. } => PyIOError::new_err(e.to_string()),
        Error::MissingScore(_) | Error::MissingFixture(_) | Error::JobNotFound(_) | Error::UnknownAnnotator(_) => {
            PyKeyError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn tokenizer(lowercase: bool) -> TokenizerConfig {
    TokenizerConfig { lowercase }
}

/// Immutable token-count table.
#[pyclass(name = "FrequencyTable", module = "textfreq", frozen)]
struct PyTable {
    inner: core::FrequencyTable,
}

#[pymethods]
impl PyTable {
    #[staticmethod]
    #[pyo3(signature = (counts, label = "table"))]
    fn from_counts(counts: HashMap<String, u64>, label: &str) -> PyResult<Self> {
        let mut sorted: Vec<_> = counts.into_iter().collect();
        sorted.sort();
        Ok(Self {
            inner: core::FrequencyTable::from_counts(sorted, label).map_err(to_py)?,
        })
    }

    /// Count the tokens of every document.
    #[staticmethod]
    #[pyo3(signature = (documents, label = "corpus", lowercase = true, threads = 1))]
    fn build(documents: Vec<String>, label: &str, lowercase: bool, threads: usize) -> PyResult<Self> {
        let inner = core::ingest::build_table_parallel(&documents, &tokenizer(lowercase), label, threads)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core::ingest::load_table(&path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, virtual_total = core::ingest::DEFAULT_VIRTUAL_TOTAL, label = "zipf"))]
    fn import_zipf(path: PathBuf, virtual_total: f64, label: &str) -> PyResult<Self> {
        let f = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        let inner = core::ingest::import_zipf_list(std::io::BufReader::new(f), &path, virtual_total, label)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        core::ingest::save_table(&self.inner, &path).map_err(to_py)
    }

    fn relative_frequency(&self, token: &str) -> PyResult<f64> {
        self.inner.relative_frequency(token).map_err(to_py)
    }

    fn count(&self, token: &str) -> f64 {
        self.inner.count(token)
    }

    #[getter]
    fn total(&self) -> f64 {
        self.inner.total()
    }

    #[getter]
    fn label(&self) -> &str {
        self.inner.label()
    }

    fn merged(&self, other: &PyTable, label: &str) -> Self {
        Self {
            inner: self.inner.merged(&other.inner, label),
        }
    }

    fn items(&self) -> Vec<(String, f64)> {
        self.inner
            .sorted_entries()
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.contains(token)
    }

    fn __repr__(&self) -> String {
        format!(
            "FrequencyTable(label={:?}, entries={}, total={})",
            self.inner.label(),
            self.inner.len(),
            self.inner.total()
        )
    }
}

#[pyclass(name = "SentenceScore", module = "textfreq", frozen, get_all)]
struct PyScore {
    text: String,
    token_count: usize,
    log_sfreq: f64,
    zipf_sfreq: f64,
}

#[pymethods]
impl PyScore {
    #[getter]
    fn sfreq(&self) -> f64 {
        self.log_sfreq.exp()
    }

    fn __repr__(&self) -> String {
        format!(
            "SentenceScore(text={:?}, token_count={}, log_sfreq={}, zipf_sfreq={})",
            self.text, self.token_count, self.log_sfreq, self.zipf_sfreq
        )
    }
}

impl From<core::SentenceScore> for PyScore {
    fn from(s: core::SentenceScore) -> Self {
        Self {
            text: s.text,
            token_count: s.token_count,
            log_sfreq: s.log_sfreq,
            zipf_sfreq: s.zipf_sfreq,
        }
    }
}

/// Scores against a table, or a table blended with a distilled one.
#[pyclass(name = "Scorer", module = "textfreq", frozen)]
struct PyScorer {
    inner: SentenceScorer<Box<dyn core::WordFrequency + Send + Sync>>,
}

#[pymethods]
impl PyScorer {
    #[new]
    #[pyo3(signature = (table, distilled = None, alpha = 0.5, beta = 0.5, zeta = 1.0, floor = SmoothingPolicy::DEFAULT_FLOOR, lowercase = true))]
    fn new(
        table: &PyTable,
        distilled: Option<&PyTable>,
        alpha: f64,
        beta: f64,
        zeta: f64,
        floor: f64,
        lowercase: bool,
    ) -> PyResult<Self> {
        let source: Box<dyn core::WordFrequency + Send + Sync> = match distilled {
            None => Box::new(table.inner.clone()),
            Some(d) => Box::new(CombinedTable::new(
                table.inner.clone(),
                d.inner.clone(),
                CombineConfig::new(alpha, beta, zeta).map_err(to_py)?,
            )),
        };
        Ok(Self {
            inner: SentenceScorer {
                source,
                smoothing: SmoothingPolicy::new(floor).map_err(to_py)?,
                tokenizer: tokenizer(lowercase),
            },
        })
    }

    fn score(&self, text: &str) -> PyResult<PyScore> {
        self.inner.score(text).map(PyScore::from).map_err(to_py)
    }

    /// Index and score of the most frequent candidate; ties go to the lowest index.
    fn select_max(&self, candidates: Vec<String>) -> PyResult<(usize, PyScore)> {
        let set = ParaphraseSet::new("py", candidates).map_err(to_py)?;
        let s = core::policy::select_max(&set, |t| self.inner.score(t)).map_err(to_py)?;
        Ok((s.index, s.score.into()))
    }

    /// `(low_index, high_index)` of the least and most frequent candidates.
    fn select_extremes(&self, candidates: Vec<String>) -> PyResult<(usize, usize)> {
        let set = ParaphraseSet::new("py", candidates).map_err(to_py)?;
        let e = core::policy::select_extremes(&set, |t| self.inner.score(t)).map_err(to_py)?;
        Ok((e.low.index, e.high.index))
    }
}

#[pyfunction]
#[pyo3(signature = (text, lowercase = true))]
fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    tokenizer(lowercase).tokenize(text)
}

#[pyfunction]
fn zipf_scale(relative: f64) -> PyResult<f64> {
    core::zipf_scale(relative).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (text, table, floor = SmoothingPolicy::DEFAULT_FLOOR))]
fn sentence_frequency(text: &str, table: &PyTable, floor: f64) -> PyResult<PyScore> {
    let smoothing = SmoothingPolicy::new(floor).map_err(to_py)?;
    core::sentence_frequency(text, &table.inner, &smoothing, &TokenizerConfig::default())
        .map(PyScore::from)
        .map_err(to_py)
}

/// `alpha*f1 + (1 + zeta*[f1 == 0]) * beta*f2`
#[pyfunction]
#[pyo3(signature = (f1, f2, alpha = 0.5, beta = 0.5, zeta = 1.0))]
fn combine(f1: f64, f2: f64, alpha: f64, beta: f64, zeta: f64) -> PyResult<f64> {
    Ok(CombineConfig::new(alpha, beta, zeta).map_err(to_py)?.combine(f1, f2))
}

/// Ids ordered by score. `mode` is "ascending", "descending" or "external"
/// (ascending by `scores` taken as an external difficulty key).
#[pyfunction]
#[pyo3(signature = (ids, scores, mode = "ascending"))]
fn order_curriculum(ids: Vec<String>, scores: HashMap<String, f64>, mode: &str) -> PyResult<Vec<String>> {
    let instances: Vec<TrainingInstance> = ids
        .into_iter()
        .map(|id| TrainingInstance {
            id,
            input_text: String::new(),
            payload: Default::default(),
        })
        .collect();
    let mode = match mode {
        "ascending" => OrderingMode::AscendingFrequency,
        "descending" => OrderingMode::DescendingFrequency,
        "external" => OrderingMode::ExternalKey(scores.clone()),
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let order = core::policy::order_curriculum(&instances, &scores, &mode).map_err(to_py)?;
    Ok(order.into_iter().map(|r| r.id).collect())
}

/// Largest self-information residual of a Zipf model.
#[pyfunction]
fn self_information_residual(s: f64, vocab: usize) -> PyResult<f64> {
    Ok(core::theory::check_self_information(s, vocab).map_err(to_py)?.max_residual)
}

/// Run every simulation check; one dict per check.
#[pyfunction]
#[pyo3(signature = (s = 1.0, vocab = 500, eps = 0.05, lam = 0.3, trials = 1000, seed = 0, max_len = 20))]
#[allow(clippy::too_many_arguments)]
fn verify_theory<'py>(
    py: Python<'py>,
    s: f64,
    vocab: usize,
    eps: f64,
    lam: f64,
    trials: usize,
    seed: u64,
    max_len: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = core::theory::TheoryConfig {
        s,
        vocab,
        eps,
        lambda: lam,
        trials,
        seed,
        max_sentence_len: max_len,
    };
    let records = py.detach(|| core::theory::run_suite(&cfg)).map_err(to_py)?;
    records
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("name", r.name)?;
            d.set_item("trials", r.trials)?;
            d.set_item("violations", r.violations)?;
            d.set_item("max_residual", r.max_residual)?;
            d.set_item("reported", r.reported.into_iter().collect::<HashMap<_, _>>())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn textfreq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTable>()?;
    m.add_class::<PyScore>()?;
    m.add_class::<PyScorer>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(zipf_scale, m)?)?;
    m.add_function(wrap_pyfunction!(sentence_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    m.add_function(wrap_pyfunction!(order_curriculum, m)?)?;
    m.add_function(wrap_pyfunction!(self_information_residual, m)?)?;
    m.add_function(wrap_pyfunction!(verify_theory, m)?)?;
    Ok(())
}
