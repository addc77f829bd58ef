use std::collections::HashMap;

use super::{MetricError, Result};
use crate::corpus::ngram_profile;

/// Multiset Jaccard of normalized n-gram frequencies: `Σ min / Σ max`.
///
/// Two sets with no n-grams at all score 1.0.
pub fn msj<A: AsRef<[String]>, B: AsRef<[String]>>(a: &[A], b: &[B], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(MetricError::InvalidOrder(n));
    }
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet("msj"));
    }
    let a: Vec<&[String]> = a.iter().map(AsRef::as_ref).collect();
    let b: Vec<&[String]> = b.iter().map(AsRef::as_ref).collect();
    let pa = ngram_profile(&a, n).map_err(|_| MetricError::InvalidOrder(n))?;
    let pb = ngram_profile(&b, n).map_err(|_| MetricError::InvalidOrder(n))?;
    match (pa.is_empty(), pb.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let (ta, tb) = (pa.total as f64, pb.total as f64);
    let mut lo = 0.0;
    let mut hi = 0.0;
    // merge the two sorted maps so the summation order is fixed
    let mut ia = pa.counts.iter().peekable();
    let mut ib = pb.counts.iter().peekable();
    loop {
        let (fa, fb) = match (ia.peek(), ib.peek()) {
            (None, None) => break,
            (Some((ga, &ca)), Some((gb, &cb))) => match ga.cmp(gb) {
                std::cmp::Ordering::Less => {
                    ia.next();
                    (ca as f64 / ta, 0.0)
                }
                std::cmp::Ordering::Greater => {
                    ib.next();
                    (0.0, cb as f64 / tb)
                }
                std::cmp::Ordering::Equal => {
                    ia.next();
                    ib.next();
                    (ca as f64 / ta, cb as f64 / tb)
                }
            },
            (Some((_, &ca)), None) => {
                ia.next();
                (ca as f64 / ta, 0.0)
            }
            (None, Some((_, &cb))) => {
                ib.next();
                (0.0, cb as f64 / tb)
            }
        };
        lo += fa.min(fb);
        hi += fa.max(fb);
    }
    Ok(lo / hi)
}

fn counts(doc: &[String], k: usize) -> HashMap<&[String], u64> {
    let mut m = HashMap::new();
    for w in doc.windows(k) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Corpus BLEU-n of `hypotheses` against the whole `references` pool.
///
/// Each hypothesis n-gram count is clipped by its largest count in any
/// single reference. Zero-match orders above 1 get add-one smoothing
/// (`1 / (total + 1)`). The brevity penalty uses, per hypothesis, the
/// closest reference length (shorter on ties).
pub fn corpus_bleu<H: AsRef<[String]>, R: AsRef<[String]>>(
    hypotheses: &[H],
    references: &[R],
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(MetricError::InvalidOrder(n));
    }
    if hypotheses.is_empty() || references.is_empty() {
        return Err(MetricError::EmptySet("bleu"));
    }

    let mut ref_lens: Vec<usize> = references.iter().map(|r| r.as_ref().len()).collect();
    ref_lens.sort_unstable();
    ref_lens.dedup();
    let closest = |c: usize| -> usize {
        let i = ref_lens.partition_point(|&l| l < c);
        match (i.checked_sub(1).map(|j| ref_lens[j]), ref_lens.get(i)) {
            (Some(lo), Some(&hi)) if c - lo <= hi - c => lo,
            (_, Some(&hi)) => hi,
            (Some(lo), None) => lo,
            (None, None) => 0,
        }
    };

    let c: usize = hypotheses.iter().map(|h| h.as_ref().len()).sum();
    if c == 0 {
        return Ok(0.0);
    }
    let r: usize = hypotheses.iter().map(|h| closest(h.as_ref().len())).sum();

    let mut log_sum = 0.0;
    for k in 1..=n {
        let mut max_ref: HashMap<&[String], u64> = HashMap::new();
        for rd in references {
            for (g, cnt) in counts(rd.as_ref(), k) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(cnt);
            }
        }
        let mut matched = 0u64;
        let mut total = 0u64;
        for h in hypotheses {
            for (g, cnt) in counts(h.as_ref(), k) {
                total += cnt;
                matched += cnt.min(max_ref.get(g).copied().unwrap_or(0));
            }
        }
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if k == 1 {
            return Ok(0.0);
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    let bp = (1.0 - r as f64 / c as f64).min(0.0).exp();
    Ok(bp * (log_sum / n as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuScores {
    pub forward: f64,
    pub backward: f64,
    pub harmonic: f64,
}

pub fn harmonic_mean(f: f64, b: f64) -> f64 {
    if f + b == 0.0 {
        0.0
    } else {
        2.0 * f * b / (f + b)
    }
}

/// Forward (quality), backward (coverage) and harmonic BLEU-n.
pub fn bleu_scores<G: AsRef<[String]>, T: AsRef<[String]>>(
    generated: &[G],
    test: &[T],
    n: usize,
) -> Result<BleuScores> {
    let forward = corpus_bleu(generated, test, n)?;
    let backward = corpus_bleu(test, generated, n)?;
    Ok(BleuScores {
        forward,
        backward,
        harmonic: harmonic_mean(forward, backward),
    })
}

pub fn forward_bleu<G: AsRef<[String]>, T: AsRef<[String]>>(generated: &[G], test: &[T], n: usize) -> Result<f64> {
    corpus_bleu(generated, test, n)
}

pub fn backward_bleu<G: AsRef<[String]>, T: AsRef<[String]>>(generated: &[G], test: &[T], n: usize) -> Result<f64> {
    corpus_bleu(test, generated, n)
}

pub fn harmonic_bleu<G: AsRef<[String]>, T: AsRef<[String]>>(generated: &[G], test: &[T], n: usize) -> Result<f64> {
    Ok(bleu_scores(generated, test, n)?.harmonic)
}
