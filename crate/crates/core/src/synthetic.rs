//! Deterministic topic-structured synthetic corpus.
//!
//! Each document picks a topic and is written as sentences mixing shared
//! function words, the topic's own words and general filler words, each
//! drawn from a Zipf-like distribution. Topic words end up with high
//! TF-IDF importance, function words with low importance.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Document, TokenizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub documents: usize,
    pub vocab_size: usize,
    pub topics: usize,
    pub function_words: usize,
    pub words_per_topic: usize,
    /// Attach the topic's three leading words as a prompt.
    pub prompts: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            documents: 1000,
            vocab_size: 2000,
            topics: 20,
            function_words: 100,
            words_per_topic: 60,
            prompts: false,
            seed: 0,
        }
    }
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Distinct lowercase pseudo-word for every index.
fn word(i: usize) -> String {
    let n_syl = ONSETS.len() * VOWELS.len();
    let mut i = i;
    let mut w = String::new();
    loop {
        let s = i % n_syl;
        w.push_str(ONSETS[s / VOWELS.len()]);
        w.push_str(VOWELS[s % VOWELS.len()]);
        i /= n_syl;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    w
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / r as f64)).expect("nonempty word class")
}

/// Generates `cfg.documents` documents with ids `syn-NNNNN`.
pub fn synthesize(cfg: &SynthConfig) -> Vec<Document> {
    let topic_total = cfg.topics * cfg.words_per_topic;
    assert!(
        cfg.topics > 0 && cfg.function_words > 0 && cfg.words_per_topic > 0,
        "synthetic corpus needs topics, function words and topic words"
    );
    assert!(
        cfg.vocab_size > cfg.function_words + topic_total,
        "vocab_size too small for the word classes"
    );
    let words: Vec<String> = (0..cfg.vocab_size).map(word).collect();
    let function = &words[..cfg.function_words];
    let topical = &words[cfg.function_words..cfg.function_words + topic_total];
    let general = &words[cfg.function_words + topic_total..];

    let z_function = zipf(function.len());
    let z_topic = zipf(cfg.words_per_topic);
    let z_general = zipf(general.len());

    let tok_cfg = TokenizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.documents)
        .map(|d| {
            let topic = rng.gen_range(0..cfg.topics);
            let own = &topical[topic * cfg.words_per_topic..(topic + 1) * cfg.words_per_topic];
            let sentences = rng.gen_range(10..=14);
            let mut text = String::new();
            for s in 0..sentences {
                if s > 0 {
                    text.push('\n');
                }
                let len = rng.gen_range(10..=19);
                for i in 0..len {
                    if i > 0 {
                        text.push(' ');
                    }
                    let r: f64 = rng.gen();
                    let w = if r < 0.45 {
                        &function[z_function.sample(&mut rng)]
                    } else if r < 0.85 {
                        &own[z_topic.sample(&mut rng)]
                    } else {
                        &general[z_general.sample(&mut rng)]
                    };
                    text.push_str(w);
                }
                text.push('.');
            }
            let doc = Document::new(format!("syn-{d:05}"), tokenize(&text, &tok_cfg));
            if cfg.prompts {
                doc.with_condition(own[..3].to_vec())
            } else {
                doc
            }
        })
        .collect()
}
