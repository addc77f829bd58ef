use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Result, StagingError, TrainingPair};

/// Largest n-gram order the noiser replaces.
pub const MAX_NOISE_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Replacement probability for n = 1..=4 (index n-1).
    pub replace_prob: [f64; MAX_NOISE_ORDER],
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            replace_prob: [0.1, 0.05, 0.025, 0.0125],
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self {
            replace_prob: [0.0; MAX_NOISE_ORDER],
            seed: 0,
        }
    }

    pub fn is_disabled(&self) -> bool {
        self.replace_prob.iter().all(|&p| p == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replace_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(StagingError::InvalidNoise(
                "replace probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Replacement n-grams per order, stored with multiplicity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NgramPool {
    grams: [Vec<Vec<String>>; MAX_NOISE_ORDER],
}

impl NgramPool {
    pub fn from_sequences<S: AsRef<[String]>>(seqs: &[S]) -> Self {
        let mut pool = Self::default();
        for s in seqs {
            for n in 1..=MAX_NOISE_ORDER {
                pool.grams[n - 1].extend(s.as_ref().windows(n).map(<[String]>::to_vec));
            }
        }
        pool
    }

    pub fn order(&self, n: usize) -> &[Vec<String>] {
        &self.grams[n - 1]
    }

    pub fn has_order(&self, n: usize) -> bool {
        !self.grams[n - 1].is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisedSequence {
    pub tokens: Vec<String>,
    /// Replaced spans as `(start, n)`.
    pub spans: Vec<(usize, usize)>,
}

impl NoisedSequence {
    pub fn replaced_tokens(&self) -> usize {
        self.spans.iter().map(|&(_, n)| n).sum()
    }
}

/// One left-to-right sweep of n-gram replacement.
///
/// At each position, orders 4 down to 1 are tried in turn; the first that
/// fires (and fits) replaces its span with a pool n-gram and the sweep
/// resumes after the span. Sequence length never changes.
pub fn noise<R: RngCore + ?Sized>(
    seq: &[String],
    cfg: &NoiseConfig,
    pool: &NgramPool,
    rng: &mut R,
) -> Result<NoisedSequence> {
    cfg.validate()?;
    for n in 1..=MAX_NOISE_ORDER {
        if cfg.replace_prob[n - 1] > 0.0 && !pool.has_order(n) {
            return Err(StagingError::MissingPoolOrder(n));
        }
    }
    let mut tokens = seq.to_vec();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut advance = 1;
        for n in (1..=MAX_NOISE_ORDER).rev() {
            let p = cfg.replace_prob[n - 1];
            if p == 0.0 || i + n > tokens.len() {
                continue;
            }
            if rng.gen::<f64>() < p {
                let grams = pool.order(n);
                let pick = &grams[rng.gen_range(0..grams.len())];
                tokens[i..i + n].clone_from_slice(pick);
                spans.push((i, n));
                advance = n;
                break;
            }
        }
        i += advance;
    }
    Ok(NoisedSequence { tokens, spans })
}

/// Stable per-document seed: `seed ^ H(stage, id)`.
pub fn document_seed(seed: u64, stage: usize, source_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update((stage as u64).to_le_bytes());
    h.update(source_id.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(bytes)
}

/// Noises the inputs of one stage's clean pairs.
///
/// The pool is built from the same pairs' clean inputs. Orders missing from
/// the pool are disabled for this stage; the disabled orders are returned.
pub fn noise_pairs(
    pairs: &[TrainingPair],
    cfg: &NoiseConfig,
) -> Result<(Vec<TrainingPair>, Vec<usize>)> {
    cfg.validate()?;
    let inputs: Vec<&[String]> = pairs.iter().map(|p| p.input.as_slice()).collect();
    let pool = NgramPool::from_sequences(&inputs);
    let mut effective = cfg.clone();
    let mut disabled = Vec::new();
    for n in 1..=MAX_NOISE_ORDER {
        if effective.replace_prob[n - 1] > 0.0 && !pool.has_order(n) {
            effective.replace_prob[n - 1] = 0.0;
            disabled.push(n);
        }
    }
    let noised = pairs
        .iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(document_seed(cfg.seed, p.stage, &p.source_id));
            let out = noise(&p.input, &effective, &pool, &mut rng)?;
            Ok(TrainingPair {
                input: out.tokens,
                noised: true,
                ..p.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((noised, disabled))
}
