use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zipf distribution over ranks `1..=vocab_size`: `P(r) = r^-s / Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipfModel {
    s: f64,
    log_z: f64,
    probabilities: Vec<f64>,
}

impl ZipfModel {
    pub fn new(s: f64, vocab_size: usize) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Config(format!("Zipf exponent must be > 0, got {s}")));
        }
        if vocab_size < 2 {
            return Err(Error::Config(format!("vocabulary must have at least 2 ranks, got {vocab_size}")));
        }
        // Smallest terms first.
        let z: f64 = (1..=vocab_size).rev().map(|n| (n as f64).powf(-s)).sum();
        let probabilities = (1..=vocab_size).map(|r| (r as f64).powf(-s) / z).collect();
        Ok(Self {
            s,
            log_z: z.ln(),
            probabilities,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn vocab_size(&self) -> usize {
        self.probabilities.len()
    }

    pub fn normalizer(&self) -> f64 {
        self.log_z.exp()
    }

    /// `C = ln Z`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_z
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, rank: usize) -> Result<f64> {
        self.check_rank(rank)?;
        Ok(self.probabilities[rank - 1])
    }

    pub(crate) fn check_rank(&self, rank: usize) -> Result<()> {
        if rank == 0 || rank > self.vocab_size() {
            return Err(Error::RankOutOfRange {
                rank,
                vocab: self.vocab_size(),
            });
        }
        Ok(())
    }

    /// `-ln P(r)` from the stored probability.
    pub fn self_information(&self, rank: usize) -> Result<f64> {
        Ok(-self.probability(rank)?.ln())
    }

    /// `s ln r + C`, the closed form of the self-information.
    pub fn zipf_self_information(&self, rank: usize) -> f64 {
        self.s * (rank as f64).ln() + self.log_z
    }
}

/// Per-rank log-domain error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Epsilon {
    Uniform(f64),
    /// One bound per rank, index 0 for rank 1.
    PerRank(Vec<f64>),
}

impl Epsilon {
    fn expand(&self, vocab: usize) -> Result<Vec<f64>> {
        let v = match self {
            Epsilon::Uniform(e) => vec![*e; vocab],
            Epsilon::PerRank(v) if v.len() == vocab => v.clone(),
            Epsilon::PerRank(v) => {
                return Err(Error::Config(format!(
                    "epsilon has {} entries for a vocabulary of {vocab}",
                    v.len()
                )))
            }
        };
        if v.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config("epsilon must be finite and >= 0 at every rank".into()));
        }
        Ok(v)
    }
}

/// A normalized model distribution `Q` with `|ln Q(r) - ln P(r)| <= eps(r)`
/// at every rank.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedModel {
    base: ZipfModel,
    epsilon: Vec<f64>,
    q: Vec<f64>,
    attempts: u32,
}

pub const MAX_PERTURB_ATTEMPTS: u32 = 10;

/// Sample log-perturbations uniformly in `[-b*eps(r), b*eps(r)]` starting at
/// `b = 1/2`, renormalize, and verify the full bound. On failure `b` halves
/// and sampling repeats, up to [`MAX_PERTURB_ATTEMPTS`] times.
pub fn build_perturbed(model: &ZipfModel, epsilon: &Epsilon, seed: u64) -> Result<PerturbedModel> {
    let eps = epsilon.expand(model.vocab_size())?;
    let p = model.probabilities();
    if eps.iter().all(|&e| e == 0.0) {
        return Ok(PerturbedModel {
            base: model.clone(),
            epsilon: eps,
            q: p.to_vec(),
            attempts: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut band = 0.5;
    for attempt in 1..=MAX_PERTURB_ATTEMPTS {
        let log_q: Vec<f64> = p
            .iter()
            .zip(&eps)
            .map(|(&pr, &e)| {
                let half = band * e;
                let u = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
                pr.ln() + u
            })
            .collect();
        let max = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = max + log_q.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let q: Vec<f64> = log_q.iter().map(|l| (l - shift).exp()).collect();
        let within = q
            .iter()
            .zip(p)
            .zip(&eps)
            .all(|((&qr, &pr), &e)| (qr.ln() - pr.ln()).abs() <= e);
        if within {
            return Ok(PerturbedModel {
                base: model.clone(),
                epsilon: eps,
                q,
                attempts: attempt,
            });
        }
        band *= 0.5;
    }
    Err(Error::BoundUnsatisfiable(MAX_PERTURB_ATTEMPTS))
}

impl PerturbedModel {
    pub fn base(&self) -> &ZipfModel {
        &self.base
    }

    pub fn vocab_size(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn epsilon(&self, rank: usize) -> f64 {
        self.epsilon[rank - 1]
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilon
    }

    pub fn max_epsilon(&self) -> f64 {
        self.epsilon.iter().copied().fold(0.0, f64::max)
    }

    /// Sampling rounds used (0 when no perturbation was needed).
    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    /// `-ln Q(r)`.
    pub fn marginal_loss(&self, rank: usize) -> f64 {
        -self.q[rank - 1].ln()
    }

    /// `ln P(r) - ln Q(r)`, the signed marginal approximation error.
    pub fn delta(&self, rank: usize) -> f64 {
        self.base.probabilities[rank - 1].ln() - self.q[rank - 1].ln()
    }

    pub fn normalization_error(&self) -> f64 {
        (self.q.iter().sum::<f64>() - 1.0).abs()
    }
}

/// Bigram conditional model `Q(w | c) = (1 - lambda) Q(w) + lambda K(w | c)`
/// where each kernel row `K(. | c)` is a Dirichlet(1) draw over a small
/// random support of continuations.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    marginal: PerturbedModel,
    lambda: f64,
    support: usize,
    kernel_tokens: Vec<u32>,
    kernel_weights: Vec<f64>,
}

pub const DEFAULT_KERNEL_SUPPORT: usize = 16;

impl ConditionalModel {
    pub fn new(marginal: PerturbedModel, lambda: f64, seed: u64) -> Result<Self> {
        Self::with_support(marginal, lambda, DEFAULT_KERNEL_SUPPORT, seed)
    }

    pub fn with_support(marginal: PerturbedModel, lambda: f64, support: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        if support == 0 {
            return Err(Error::Config("kernel support must be at least 1".into()));
        }
        let v = marginal.vocab_size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_726e_656c);
        let mut kernel_tokens = Vec::with_capacity(v * support);
        let mut kernel_weights = Vec::with_capacity(v * support);
        for _ in 0..v {
            let draws: Vec<f64> = (0..support)
                .map(|_| -(1.0 - rng.random::<f64>()).ln())
                .collect();
            let total: f64 = draws.iter().sum();
            for d in draws {
                kernel_tokens.push(rng.random_range(0..v as u32));
                kernel_weights.push(d / total);
            }
        }
        let model = Self {
            marginal,
            lambda,
            support,
            kernel_tokens,
            kernel_weights,
        };
        let q_sum: f64 = model.marginal.q().iter().sum();
        for c in 0..v {
            let k_sum: f64 = model.kernel_weights[c * support..(c + 1) * support].iter().sum();
            let row = (1.0 - lambda) * q_sum + lambda * k_sum;
            if (row - 1.0).abs() > 1e-10 {
                return Err(Error::Precondition(format!(
                    "conditional row {} sums to {row}",
                    c + 1
                )));
            }
        }
        Ok(model)
    }

    pub fn marginal(&self) -> &PerturbedModel {
        &self.marginal
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn kernel(&self, word: usize, context: usize) -> f64 {
        let row = (context - 1) * self.support..context * self.support;
        self.kernel_tokens[row.clone()]
            .iter()
            .zip(&self.kernel_weights[row])
            .filter(|(&t, _)| t as usize == word - 1)
            .map(|(_, &w)| w)
            .sum()
    }

    /// `Q(word | context)`; with no context this is the marginal `Q(word)`.
    pub fn conditional(&self, word: usize, context: Option<usize>) -> f64 {
        let q = self.marginal.q[word - 1];
        match context {
            Some(c) if self.lambda > 0.0 => (1.0 - self.lambda) * q + self.lambda * self.kernel(word, c),
            _ => q,
        }
    }

    /// Sum of `Q(. | context)` over the vocabulary, computed densely.
    pub fn row_sum(&self, context: usize) -> f64 {
        (1..=self.marginal.vocab_size())
            .map(|w| self.conditional(w, Some(context)))
            .sum()
    }
}
