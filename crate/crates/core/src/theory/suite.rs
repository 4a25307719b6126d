use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{
    monotonicity_sweep, self_information_check, semilog_fit, sentence_decomposition, tfl_condition_trial,
    uniform_activation_threshold, EtaBounds,
};
use super::models::{build_perturbed, ConditionalModel, Epsilon, ZipfModel};
use crate::error::{Error, Result};

pub const DECOMPOSITION_TOLERANCE: f64 = 1e-10;
pub const SEMILOG_EXACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    pub s: f64,
    pub vocab: usize,
    pub eps: f64,
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_sentence_len: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            s: 1.0,
            vocab: 500,
            eps: 0.05,
            lambda: 0.3,
            trials: 1000,
            seed: 0,
            max_sentence_len: 20,
        }
    }
}

/// One line of the machine-readable summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub trials: u64,
    pub violations: u64,
    pub max_residual: f64,
    /// Observations that are reported but not asserted.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reported: BTreeMap<String, f64>,
}

impl CheckRecord {
    fn new(name: &str, trials: u64, violations: u64, max_residual: f64) -> Self {
        Self {
            name: name.into(),
            trials,
            violations,
            max_residual,
            reported: BTreeMap::new(),
        }
    }

    fn report(mut self, key: &str, value: f64) -> Self {
        self.reported.insert(key.into(), value);
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples sentences whose ranks follow the Zipf distribution.
pub struct SentenceSampler {
    ranks: WeightedIndex<f64>,
    max_len: usize,
}

impl SentenceSampler {
    pub fn new(model: &ZipfModel, max_len: usize) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::Config("max sentence length must be at least 1".into()));
        }
        let ranks = WeightedIndex::new(model.probabilities()).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { ranks, max_len })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let k = rng.random_range(1..=self.max_len);
        (0..k).map(|_| self.ranks.sample(rng) + 1).collect()
    }
}

pub fn check_self_information(s: f64, vocab: usize) -> Result<CheckRecord> {
    let residual = self_information_check(&ZipfModel::new(s, vocab)?);
    Ok(CheckRecord::new("self_information", vocab as u64, u64::from(residual > 1e-12), residual))
}

pub fn check_semilog(cfg: &TheoryConfig) -> Result<Vec<CheckRecord>> {
    let zipf = ZipfModel::new(cfg.s, cfg.vocab)?;
    let exact = semilog_fit(&build_perturbed(&zipf, &Epsilon::Uniform(0.0), cfg.seed)?)?;
    let slope_err = (exact.slope - cfg.s).abs();
    let icpt_err = (exact.intercept - zipf.log_normalizer()).abs();
    let exact_rec = CheckRecord::new(
        "semilog_exact",
        1,
        u64::from(slope_err > SEMILOG_EXACT_TOLERANCE) + u64::from(icpt_err > SEMILOG_EXACT_TOLERANCE),
        slope_err.max(icpt_err),
    )
    .report("slope", exact.slope)
    .report("intercept", exact.intercept);

    let noisy = semilog_fit(&build_perturbed(&zipf, &Epsilon::Uniform(cfg.eps), cfg.seed)?)?;
    let band = 2.0 * cfg.eps;
    let outside = noisy
        .rows
        .iter()
        .filter(|r| (r.loss - (noisy.slope * r.ln_rank + noisy.intercept)).abs() > band)
        .count() as u64;
    let band_rec = CheckRecord::new("semilog_band", noisy.rows.len() as u64, outside, noisy.max_abs_residual)
        .report("slope", noisy.slope)
        .report("slope_error", (noisy.slope - cfg.s).abs());
    Ok(vec![exact_rec, band_rec])
}

/// Build `cfg.trials` perturbed models (seeds `seed..seed+trials`) and sweep
/// every rank pair of each. Also checks that the observed activation
/// boundary sits at `exp(2 eps / s)`.
pub fn check_monotonicity(cfg: &TheoryConfig) -> Result<Vec<CheckRecord>> {
    let zipf = ZipfModel::new(cfg.s, cfg.vocab)?;
    let threshold = uniform_activation_threshold(cfg.eps, cfg.s);
    let reports = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| {
            let model = build_perturbed(&zipf, &Epsilon::Uniform(cfg.eps), cfg.seed + i)?;
            Ok(monotonicity_sweep(&model))
        })
        .collect::<Result<Vec<_>>>()?;

    let violations: u64 = reports.iter().map(|r| r.violations).sum();
    let active: u64 = reports.iter().map(|r| r.active_pairs).sum();
    let total: u64 = reports.iter().map(|r| r.total_pairs).sum();
    let mono = CheckRecord::new("monotonicity", cfg.trials as u64, violations, 0.0)
        .report("active_pairs", active as f64)
        .report("total_pairs", total as f64);

    let misplaced = reports
        .iter()
        .filter(|r| {
            r.min_active_ratio.is_some_and(|m| m <= threshold)
                || r.max_inactive_ratio.is_some_and(|m| m > threshold)
        })
        .count() as u64;
    let min_active = reports
        .iter()
        .filter_map(|r| r.min_active_ratio)
        .fold(f64::INFINITY, f64::min);
    let boundary = CheckRecord::new("activation_threshold", cfg.trials as u64, misplaced, 0.0)
        .report("threshold", threshold)
        .report("min_active_ratio", min_active);
    Ok(vec![mono, boundary])
}

pub fn check_decomposition(cfg: &TheoryConfig) -> Result<CheckRecord> {
    let zipf = ZipfModel::new(cfg.s, cfg.vocab)?;
    let marginal = build_perturbed(&zipf, &Epsilon::Uniform(cfg.eps), cfg.seed)?;
    let cond = ConditionalModel::new(marginal, cfg.lambda, cfg.seed)?;
    let sampler = SentenceSampler::new(&zipf, cfg.max_sentence_len)?;
    let decomps = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| sentence_decomposition(&sampler.sample(&mut trial_rng(cfg.seed, i)), &cond))
        .collect::<Result<Vec<_>>>()?;

    let violations = decomps
        .iter()
        .filter(|d| d.residual > DECOMPOSITION_TOLERANCE || d.delta_bar.abs() > d.eps_bar)
        .count() as u64;
    let max_residual = decomps.iter().map(|d| d.residual).fold(0.0, f64::max);
    let mut rec = CheckRecord::new("sentence_decomposition", decomps.len() as u64, violations, max_residual);
    let tight: Vec<&_> = decomps.iter().filter(|d| d.eps_bar > 0.0).collect();
    if !tight.is_empty() {
        let n = tight.len() as f64;
        let ratio = tight.iter().map(|d| d.delta_bar.abs() / d.eps_bar).sum::<f64>() / n;
        let scaled = tight
            .iter()
            .map(|d| d.delta_bar.abs() / d.eps_bar * (d.token_count as f64).sqrt())
            .sum::<f64>()
            / n;
        rec = rec
            .report("mean_delta_over_eps", ratio)
            .report("mean_delta_over_eps_times_sqrt_k", scaled);
    }
    Ok(rec)
}

/// Random sentence pairs ordered so that `sfreq(x) > sfreq(x')`; counts
/// cases where the sufficient condition holds but the loss ordering fails.
pub fn check_tfl_condition(cfg: &TheoryConfig) -> Result<CheckRecord> {
    let zipf = ZipfModel::new(cfg.s, cfg.vocab)?;
    let marginal = build_perturbed(&zipf, &Epsilon::Uniform(cfg.eps), cfg.seed)?;
    let cond = ConditionalModel::new(marginal, cfg.lambda, cfg.seed)?;
    let sampler = SentenceSampler::new(&zipf, cfg.max_sentence_len)?;
    let log_sfreq = |x: &[usize]| -> f64 {
        x.iter().map(|&r| zipf.probabilities()[r - 1].ln()).sum::<f64>() / x.len() as f64
    };
    let outcomes = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed ^ 0x0074_666c, i);
            loop {
                let a = sampler.sample(&mut rng);
                let b = sampler.sample(&mut rng);
                let (fa, fb) = (log_sfreq(&a), log_sfreq(&b));
                if fa == fb {
                    continue;
                }
                let (x, xp) = if fa > fb { (a, b) } else { (b, a) };
                match tfl_condition_trial(&x, &xp, &cond, EtaBounds::Measured) {
                    // Rounding can make distinct multisets tie after the
                    // decomposition's own summation order; resample.
                    Err(Error::Precondition(_)) => continue,
                    other => return other,
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let violations = outcomes
        .iter()
        .filter(|o| o.condition_holds && !o.ordering_holds)
        .count() as u64;
    let held = outcomes.iter().filter(|o| o.condition_holds).count() as f64;
    let unguaranteed_but_ordered = outcomes
        .iter()
        .filter(|o| !o.condition_holds && o.ordering_holds)
        .count() as f64;
    Ok(CheckRecord::new("tfl_condition", outcomes.len() as u64, violations, 0.0)
        .report("condition_rate", held / n)
        .report("ordered_without_condition_rate", unguaranteed_but_ordered / n))
}

/// All simulation checks for one configuration.
pub fn run_suite(cfg: &TheoryConfig) -> Result<Vec<CheckRecord>> {
    let mut out = vec![check_self_information(cfg.s, cfg.vocab)?];
    out.extend(check_semilog(cfg)?);
    out.extend(check_monotonicity(cfg)?);
    out.push(check_decomposition(cfg)?);
    out.push(check_tfl_condition(cfg)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let cfg = TheoryConfig {
            vocab: 120,
            trials: 40,
            ..TheoryConfig::default()
        };
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a, b);
        for rec in &a {
            assert!(rec.passed(), "{rec:?}");
        }
        let names: Vec<_> = a.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "self_information",
                "semilog_exact",
                "semilog_band",
                "monotonicity",
                "activation_threshold",
                "sentence_decomposition",
                "tfl_condition"
            ]
        );
    }

    #[test]
    fn sampler_respects_length_and_vocab() {
        let z = ZipfModel::new(1.0, 30).unwrap();
        let s = SentenceSampler::new(&z, 5).unwrap();
        let mut rng = trial_rng(1, 2);
        for _ in 0..200 {
            let x = s.sample(&mut rng);
            assert!((1..=5).contains(&x.len()));
            assert!(x.iter().all(|r| (1..=30).contains(r)));
        }
    }
}
