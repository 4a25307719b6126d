use std::io::Write;

use serde::Serialize;

use super::models::{ConditionalModel, PerturbedModel, ZipfModel};
use crate::error::{Error, Result};

/// Largest `|-ln P(r) - (s ln r + C)|` over all ranks.
pub fn self_information_check(model: &ZipfModel) -> f64 {
    (1..=model.vocab_size())
        .map(|r| {
            let measured = -model.probabilities()[r - 1].ln();
            (measured - model.zipf_self_information(r)).abs()
        })
        .fold(0.0, f64::max)
}

/// Smallest rank ratio `r_j / r_i` that guarantees strict monotonicity of
/// the marginal loss under a uniform bound `eps`: `exp(2 eps / s)`.
pub fn uniform_activation_threshold(eps: f64, s: f64) -> f64 {
    (2.0 * eps / s).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub total_pairs: u64,
    /// Pairs for which `eps(r_i) + eps(r_j) < s ln(r_j / r_i)`.
    pub active_pairs: u64,
    /// Active pairs where `-ln Q(r_i) < -ln Q(r_j)` failed.
    pub violations: u64,
    /// Smallest `r_j / r_i` among active pairs.
    pub min_active_ratio: Option<f64>,
    /// Largest `r_j / r_i` among inactive pairs.
    pub max_inactive_ratio: Option<f64>,
}

pub fn monotonicity_sweep(model: &PerturbedModel) -> MonotonicityReport {
    let v = model.vocab_size();
    let s = model.base().exponent();
    let loss: Vec<f64> = (1..=v).map(|r| model.marginal_loss(r)).collect();
    let eps = model.epsilons();
    let mut rep = MonotonicityReport {
        total_pairs: 0,
        active_pairs: 0,
        violations: 0,
        min_active_ratio: None,
        max_inactive_ratio: None,
    };
    let mut min_active = f64::INFINITY;
    let mut max_inactive = f64::NEG_INFINITY;
    for i in 1..v {
        let ri = i as f64;
        for j in (i + 1)..=v {
            let ratio = j as f64 / ri;
            rep.total_pairs += 1;
            if eps[i - 1] + eps[j - 1] < s * ratio.ln() {
                rep.active_pairs += 1;
                min_active = min_active.min(ratio);
                if loss[i - 1] >= loss[j - 1] {
                    rep.violations += 1;
                }
            } else {
                max_inactive = max_inactive.max(ratio);
            }
        }
    }
    rep.min_active_ratio = min_active.is_finite().then_some(min_active);
    rep.max_inactive_ratio = max_inactive.is_finite().then_some(max_inactive);
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub token_count: usize,
    /// Average conditional NLL, computed directly from `Q(x_k | x_{k-1})`.
    pub loss: f64,
    /// `-ln sfreq(x)` under the true distribution.
    pub neg_log_sfreq: f64,
    /// Mean marginal approximation error.
    pub delta_bar: f64,
    /// Mean contextual discrepancy.
    pub eta_bar: f64,
    /// Mean of `eps(r_k)`.
    pub eps_bar: f64,
    /// `|loss - (neg_log_sfreq + delta_bar + eta_bar)|`.
    pub residual: f64,
}

pub fn sentence_decomposition(sentence: &[usize], cond: &ConditionalModel) -> Result<Decomposition> {
    if sentence.is_empty() {
        return Err(Error::Precondition("sentence must have at least one token".into()));
    }
    let marginal = cond.marginal();
    let zipf = marginal.base();
    for &r in sentence {
        zipf.check_rank(r)?;
    }
    let k = sentence.len() as f64;
    let (mut cond_sum, mut ideal_sum, mut delta_sum, mut eta_sum, mut eps_sum) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (pos, &r) in sentence.iter().enumerate() {
        let context = pos.checked_sub(1).map(|p| sentence[p]);
        let conditional_loss = -cond.conditional(r, context).ln();
        let marginal_loss = marginal.marginal_loss(r);
        let ideal = zipf.self_information(r)?;
        cond_sum += conditional_loss;
        ideal_sum += ideal;
        delta_sum += marginal_loss - ideal;
        eta_sum += conditional_loss - marginal_loss;
        eps_sum += marginal.epsilon(r);
    }
    let loss = cond_sum / k;
    let neg_log_sfreq = ideal_sum / k;
    let delta_bar = delta_sum / k;
    let eta_bar = eta_sum / k;
    Ok(Decomposition {
        token_count: sentence.len(),
        loss,
        neg_log_sfreq,
        delta_bar,
        eta_bar,
        eps_bar: eps_sum / k,
        residual: (loss - (neg_log_sfreq + delta_bar + eta_bar)).abs(),
    })
}

/// Bounds on `|eta_bar|` for the two sentences of a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaBounds {
    /// Use the measured `|eta_bar|` of each sentence, the tightest valid bound.
    Measured,
    Given { x: f64, x_prime: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    /// `ln(sfreq(x) / sfreq(x'))`.
    pub log_ratio: f64,
    /// `(eps_bar_x + eta_x) + (eps_bar_x' + eta_x')`.
    pub threshold: f64,
    pub condition_holds: bool,
    /// `loss(x) < loss(x')`.
    pub ordering_holds: bool,
}

/// Evaluate the sufficient condition for `x` (the more frequent sentence)
/// to have strictly lower loss than `x_prime`.
pub fn tfl_condition_trial(
    x: &[usize],
    x_prime: &[usize],
    cond: &ConditionalModel,
    eta_bounds: EtaBounds,
) -> Result<TrialOutcome> {
    let dx = sentence_decomposition(x, cond)?;
    let dp = sentence_decomposition(x_prime, cond)?;
    let log_ratio = dp.neg_log_sfreq - dx.neg_log_sfreq;
    if !(log_ratio > 0.0) {
        return Err(Error::Precondition(
            "sfreq(x) must be strictly greater than sfreq(x')".into(),
        ));
    }
    let (eta_x, eta_p) = match eta_bounds {
        EtaBounds::Measured => (dx.eta_bar.abs(), dp.eta_bar.abs()),
        EtaBounds::Given { x, x_prime } => {
            if x < dx.eta_bar.abs() || x_prime < dp.eta_bar.abs() {
                return Err(Error::Precondition(
                    "given eta bound is smaller than the measured contextual discrepancy".into(),
                ));
            }
            (x, x_prime)
        }
    };
    let threshold = (dx.eps_bar + eta_x) + (dp.eps_bar + eta_p);
    Ok(TrialOutcome {
        log_ratio,
        threshold,
        condition_holds: log_ratio > threshold,
        ordering_holds: dx.loss < dp.loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemilogRow {
    pub rank: usize,
    pub ln_rank: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemilogFit {
    pub rows: Vec<SemilogRow>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|loss - (slope ln r + intercept)|`.
    pub max_abs_residual: f64,
}

/// Least-squares line through `(ln r, -ln Q(r))` over the whole vocabulary.
pub fn semilog_fit(model: &PerturbedModel) -> Result<SemilogFit> {
    let v = model.vocab_size();
    if v < 3 {
        return Err(Error::Precondition(format!(
            "semi-log fit needs at least 3 ranks, got {v}"
        )));
    }
    let rows: Vec<SemilogRow> = (1..=v)
        .map(|r| SemilogRow {
            rank: r,
            ln_rank: (r as f64).ln(),
            loss: model.marginal_loss(r),
        })
        .collect();
    let n = v as f64;
    let mean_x = rows.iter().map(|r| r.ln_rank).sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r.loss).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for r in &rows {
        let dx = r.ln_rank - mean_x;
        sxy += dx * (r.loss - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_abs_residual = rows
        .iter()
        .map(|r| (r.loss - (slope * r.ln_rank + intercept)).abs())
        .fold(0.0, f64::max);
    Ok(SemilogFit {
        rows,
        slope,
        intercept,
        max_abs_residual,
    })
}

/// `rank<TAB>ln_rank<TAB>loss` rows with a header, for plotting.
pub fn write_semilog_rows(fit: &SemilogFit, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "rank\tln_rank\tloss")?;
    for r in &fit.rows {
        writeln!(w, "{}\t{}\t{}", r.rank, r.ln_rank, r.loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::models::{build_perturbed, Epsilon};
    use super::*;

    fn cond(eps: f64, lambda: f64, v: usize, seed: u64) -> ConditionalModel {
        let z = ZipfModel::new(1.0, v).unwrap();
        let q = build_perturbed(&z, &Epsilon::Uniform(eps), seed).unwrap();
        ConditionalModel::new(q, lambda, seed).unwrap()
    }

    #[test]
    fn self_information_residual_is_rounding_only() {
        for (s, v) in [(1.0, 3), (0.7, 1000), (1.5, 20_000)] {
            assert!(self_information_check(&ZipfModel::new(s, v).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn threshold_at_unit_exponent() {
        assert!((uniform_activation_threshold(0.1, 1.0) - 1.221403).abs() < 1e-6);
    }

    #[test]
    fn pure_zipf_activates_every_pair() {
        let z = ZipfModel::new(1.0, 80).unwrap();
        let q = build_perturbed(&z, &Epsilon::Uniform(0.0), 0).unwrap();
        let rep = monotonicity_sweep(&q);
        assert_eq!(rep.total_pairs, 80 * 79 / 2);
        assert_eq!(rep.active_pairs, rep.total_pairs);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn uniform_epsilon_activation_boundary() {
        let z = ZipfModel::new(1.0, 300).unwrap();
        let q = build_perturbed(&z, &Epsilon::Uniform(0.1), 4).unwrap();
        let rep = monotonicity_sweep(&q);
        let t = uniform_activation_threshold(0.1, 1.0);
        assert!(rep.min_active_ratio.unwrap() > t);
        assert!(rep.max_inactive_ratio.unwrap() <= t);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn lambda_zero_has_no_contextual_discrepancy() {
        let c = cond(0.1, 0.0, 50, 1);
        let d = sentence_decomposition(&[1, 5, 9, 2, 50], &c).unwrap();
        assert_eq!(d.eta_bar, 0.0);
    }

    #[test]
    fn error_free_model_loss_equals_neg_log_sfreq() {
        let c = cond(0.0, 0.0, 50, 1);
        let d = sentence_decomposition(&[1, 5, 9, 2, 50, 5], &c).unwrap();
        assert_eq!(d.loss, d.neg_log_sfreq);
        assert_eq!(d.delta_bar, 0.0);
    }

    #[test]
    fn decomposition_identity_random_sentence() {
        use rand::{Rng, SeedableRng};
        let c = cond(0.05, 0.5, 200, 7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<usize> = (0..12).map(|_| rng.random_range(1..=200)).collect();
        let d = sentence_decomposition(&x, &c).unwrap();
        assert!(d.residual <= 1e-10);
        assert!(d.delta_bar.abs() <= d.eps_bar);
    }

    #[test]
    fn decomposition_errors() {
        let c = cond(0.0, 0.0, 10, 0);
        assert!(matches!(sentence_decomposition(&[1, 11], &c), Err(Error::RankOutOfRange { rank: 11, .. })));
        assert!(matches!(sentence_decomposition(&[0], &c), Err(Error::RankOutOfRange { .. })));
        assert!(sentence_decomposition(&[], &c).is_err());
    }

    #[test]
    fn identical_sentences_fail_precondition() {
        let c = cond(0.05, 0.3, 30, 0);
        assert!(matches!(
            tfl_condition_trial(&[1, 2, 3], &[1, 2, 3], &c, EtaBounds::Measured),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn error_free_limit_reduces_to_frequency_order() {
        let c = cond(0.0, 0.0, 100, 0);
        let out = tfl_condition_trial(&[1, 2, 3], &[4, 50, 99], &c, EtaBounds::Measured).unwrap();
        assert_eq!(out.threshold, 0.0);
        assert!(out.condition_holds && out.ordering_holds);
    }

    #[test]
    fn given_eta_bounds_must_cover_measured() {
        let c = cond(0.05, 0.5, 100, 3);
        assert!(tfl_condition_trial(&[1, 2], &[70, 90], &c, EtaBounds::Given { x: 0.0, x_prime: 0.0 }).is_err());
        let out = tfl_condition_trial(&[1, 2], &[70, 90], &c, EtaBounds::Given { x: 10.0, x_prime: 10.0 }).unwrap();
        assert!(!out.condition_holds);
    }

    #[test]
    fn semilog_exact_recovery() {
        let z = ZipfModel::new(1.2, 5000).unwrap();
        let q = build_perturbed(&z, &Epsilon::Uniform(0.0), 0).unwrap();
        let fit = semilog_fit(&q).unwrap();
        assert!((fit.slope - 1.2).abs() <= 1e-9);
        assert!((fit.intercept - z.log_normalizer()).abs() <= 1e-9);
    }

    #[test]
    fn semilog_band() {
        let z = ZipfModel::new(1.0, 1000).unwrap();
        for seed in 0..5 {
            let q = build_perturbed(&z, &Epsilon::Uniform(0.1), seed).unwrap();
            let fit = semilog_fit(&q).unwrap();
            assert!(fit.max_abs_residual <= 0.2);
            assert!((fit.slope - 1.0).abs() <= 0.1);
        }
    }

    #[test]
    fn semilog_needs_three_ranks() {
        let z = ZipfModel::new(1.0, 2).unwrap();
        let q = build_perturbed(&z, &Epsilon::Uniform(0.0), 0).unwrap();
        assert!(semilog_fit(&q).is_err());
    }

    #[test]
    fn semilog_rows_format() {
        let z = ZipfModel::new(1.0, 3).unwrap();
        let q = build_perturbed(&z, &Epsilon::Uniform(0.0), 0).unwrap();
        let mut buf = Vec::new();
        write_semilog_rows(&semilog_fit(&q).unwrap(), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 4);
        assert!(s.starts_with("rank\tln_rank\tloss\n1\t0\t"));
    }
}
