//! Nucleus (top-p) sampling.

use std::cmp::Ordering;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Slack on the cumulative-mass comparison so that round-off in sums such as
/// `0.5 + 0.3` does not flip which prefix reaches `top_p`.
const MASS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub top_p: f64,
    pub max_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            top_p: 0.95,
            max_tokens: 1024,
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl DecoderConfig {
    /// A config whose nucleus always holds exactly the most probable symbol.
    pub fn greedy() -> Self {
        Self {
            top_p: f64::MIN_POSITIVE,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ModelError::InvalidConfig(format!(
                "top_p must lie in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_tokens < 1 {
            return Err(ModelError::InvalidConfig("max_tokens must be >= 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Descending probability, ties by ascending symbol.
pub(crate) fn by_prob_desc<S: Ord>(a: &(S, f64), b: &(S, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Takes symbols from an already-sorted stream until the nucleus mass is
/// reached, then draws one proportionally to the kept masses.
pub(crate) fn nucleus_pick<S: Copy, I, R>(sorted: I, top_p: f64, rng: &mut R) -> Option<S>
where
    I: IntoIterator<Item = (S, f64)>,
    R: RngCore + ?Sized,
{
    let mut kept: Vec<(S, f64)> = Vec::new();
    let mut mass = 0.0;
    for (s, p) in sorted {
        if p <= 0.0 {
            continue;
        }
        kept.push((s, p));
        mass += p;
        if mass >= top_p - MASS_SLACK {
            break;
        }
    }
    let last = kept.last()?.0;
    let mut u = rng.gen::<f64>() * mass;
    for (s, p) in &kept {
        if u < *p {
            return Some(*s);
        }
        u -= p;
    }
    Some(last)
}

/// Applies temperature, truncates to the top-p nucleus, renormalizes and
/// samples.
pub fn sample_next<S: Copy + Ord, R: RngCore + ?Sized>(
    distribution: &[(S, f64)],
    cfg: &DecoderConfig,
    rng: &mut R,
) -> Result<S> {
    if distribution.is_empty() {
        return Err(ModelError::EmptyDistribution);
    }
    let mut scaled: Vec<(S, f64)> = if cfg.temperature == 1.0 {
        distribution.to_vec()
    } else {
        let inv_t = 1.0 / cfg.temperature;
        let powered: Vec<(S, f64)> = distribution.iter().map(|&(s, p)| (s, p.powf(inv_t))).collect();
        let z: f64 = powered.iter().map(|(_, p)| p).sum();
        powered.into_iter().map(|(s, p)| (s, p / z)).collect()
    };
    scaled.sort_by(by_prob_desc);
    nucleus_pick(scaled, cfg.top_p, rng).ok_or(ModelError::EmptyDistribution)
}

/// Kept symbols and their renormalized probabilities, for inspection.
pub fn nucleus<S: Copy + Ord>(distribution: &[(S, f64)], top_p: f64) -> Vec<(S, f64)> {
    let mut sorted = distribution.to_vec();
    sorted.sort_by(by_prob_desc);
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for (s, p) in sorted {
        if p <= 0.0 {
            continue;
        }
        kept.push((s, p));
        mass += p;
        if mass >= top_p - MASS_SLACK {
            break;
        }
    }
    kept.into_iter().map(|(s, p)| (s, p / mass)).collect()
}
