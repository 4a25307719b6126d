//! Paraphrase selection and curriculum ordering.
//!
//! Every tie is broken by input position so that outputs are deterministic.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::SentenceScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseSet {
    pub id: String,
    pub candidates: Vec<String>,
}

impl ParaphraseSet {
    pub fn new(id: impl Into<String>, candidates: Vec<String>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Config("paraphrase set has no candidates".into()));
        }
        if let Some(i) = candidates.iter().position(|c| c.is_empty()) {
            return Err(Error::Config(format!("candidate {i} is empty")));
        }
        Ok(Self {
            id: id.into(),
            candidates,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub index: usize,
    pub score: SentenceScore,
}

fn score_all<F>(set: &ParaphraseSet, mut scorer: F) -> Result<Vec<SentenceScore>>
where
    F: FnMut(&str) -> Result<SentenceScore>,
{
    set.candidates
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let s = scorer(c).map_err(|e| Error::Unscoreable {
                index,
                reason: e.to_string(),
            })?;
            if s.log_sfreq.is_nan() {
                return Err(Error::Unscoreable {
                    index,
                    reason: "score is NaN".into(),
                });
            }
            Ok(s)
        })
        .collect()
}

fn argmax(scores: &[SentenceScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.log_sfreq > scores[best].log_sfreq {
            best = i;
        }
    }
    best
}

fn argmin(scores: &[SentenceScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.log_sfreq < scores[best].log_sfreq {
            best = i;
        }
    }
    best
}

/// The most frequent candidate; the earliest one wins ties.
pub fn select_max<F>(set: &ParaphraseSet, scorer: F) -> Result<Selection>
where
    F: FnMut(&str) -> Result<SentenceScore>,
{
    let mut scores = score_all(set, scorer)?;
    let index = argmax(&scores);
    Ok(Selection {
        index,
        score: scores.swap_remove(index),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremes {
    pub low: Selection,
    pub high: Selection,
}

/// Least and most frequent candidates. When every score is equal the
/// result is `(0, 1)` so the two picks are always distinct indices.
pub fn select_extremes<F>(set: &ParaphraseSet, scorer: F) -> Result<Extremes>
where
    F: FnMut(&str) -> Result<SentenceScore>,
{
    if set.candidates.len() < 2 {
        return Err(Error::TooFewCandidates {
            needed: 2,
            got: set.candidates.len(),
        });
    }
    let scores = score_all(set, scorer)?;
    let (lo, hi) = match (argmin(&scores), argmax(&scores)) {
        (lo, hi) if lo == hi => (0, 1),
        pair => pair,
    };
    Ok(Extremes {
        low: Selection {
            index: lo,
            score: scores[lo].clone(),
        },
        high: Selection {
            index: hi,
            score: scores[hi].clone(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub id: String,
    pub input_text: String,
    /// Carried through untouched, e.g. the reference output.
    #[serde(default)]
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrderingMode {
    /// Least frequent first.
    AscendingFrequency,
    /// Most frequent first.
    DescendingFrequency,
    /// Ascending by a caller-supplied difficulty per instance id.
    ExternalKey(HashMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedInstance {
    pub id: String,
    pub rank: usize,
    pub score: f64,
}

fn lookup(keys: &HashMap<String, f64>, id: &str) -> Result<f64> {
    let k = *keys.get(id).ok_or_else(|| Error::MissingScore(id.to_owned()))?;
    if k.is_nan() {
        return Err(Error::NanScore(id.to_owned()));
    }
    Ok(k)
}

/// Order instances for one epoch; the same order is used every epoch.
///
/// Sorting is stable in every mode. Descending sorts by the negated key,
/// so it is the exact reverse of ascending when keys are distinct, and
/// tied instances keep their input order in both directions.
pub fn order_curriculum(
    instances: &[TrainingInstance],
    scores: &HashMap<String, f64>,
    mode: &OrderingMode,
) -> Result<Vec<RankedInstance>> {
    let keys = match mode {
        OrderingMode::ExternalKey(k) => k,
        _ => scores,
    };
    let mut keyed = instances
        .iter()
        .map(|inst| Ok((lookup(keys, &inst.id)?, inst.id.as_str())))
        .collect::<Result<Vec<_>>>()?;
    match mode {
        OrderingMode::DescendingFrequency => keyed.sort_by(|a, b| b.0.total_cmp(&a.0)),
        _ => keyed.sort_by(|a, b| a.0.total_cmp(&b.0)),
    }
    Ok(keyed
        .into_iter()
        .enumerate()
        .map(|(rank, (score, id))| RankedInstance {
            id: id.to_owned(),
            rank,
            score,
        })
        .collect())
}

/// One `{id, rank, score}` JSON object per line.
pub fn write_order(order: &[RankedInstance], w: &mut dyn Write) -> std::io::Result<()> {
    for r in order {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
