//! Intermediate-sequence extraction and stage training pairs.
//!
//! Stage `k` learns to map `c*_{k-1}` (the document restricted to
//! `V_{k-1}`) to `c*_k`; stage 1 maps the condition to `c*_1`.

mod align;
mod noise;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::importance::StageVocabulary;

pub use align::{align, lcs_align, AnchorAlignment};
pub use noise::{noise, noise_pairs, document_seed, NgramPool, NoiseConfig, NoisedSequence};

#[derive(Debug, Error)]
pub enum StagingError {
    #[error("noise pool has no {0}-grams but replace probability is nonzero")]
    MissingPoolOrder(usize),
    #[error("invalid noise config: {0}")]
    InvalidNoise(String),
    #[error("pair file line {line}: {message}")]
    BadPairFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StagingError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateSequence {
    pub stage: usize,
    pub tokens: Vec<String>,
    pub source_id: String,
}

/// Order-preserving restriction of `tokens` to `vocab`.
pub fn extract_tokens(tokens: &[String], vocab: &BTreeSet<String>) -> Vec<String> {
    tokens.iter().filter(|t| vocab.contains(*t)).cloned().collect()
}

pub fn extract(doc: &Document, vocab: &BTreeSet<String>, stage: usize) -> IntermediateSequence {
    IntermediateSequence {
        stage,
        tokens: extract_tokens(&doc.tokens, vocab),
        source_id: doc.id.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub stage: usize,
    pub source_id: String,
    pub input: Vec<String>,
    pub target: Vec<String>,
    #[serde(default)]
    pub noised: bool,
}

/// Per-stage training pairs (index 0 is stage 1) and dropped-pair counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePairs {
    pub stages: Vec<Vec<TrainingPair>>,
    pub dropped_empty: Vec<usize>,
}

impl StagePairs {
    pub fn stage(&self, k: usize) -> &[TrainingPair] {
        &self.stages[k - 1]
    }
}

pub fn make_pairs(corpus: &Corpus, vocabs: &StageVocabulary) -> StagePairs {
    let k_total = vocabs.num_stages();
    let mut stages = vec![Vec::new(); k_total];
    let mut dropped = vec![0; k_total];
    for doc in corpus.documents() {
        let mut previous = doc.condition.clone();
        for k in 1..=k_total {
            let target = extract_tokens(&doc.tokens, vocabs.stage(k));
            let input = std::mem::replace(&mut previous, target.clone());
            if target.is_empty() {
                dropped[k - 1] += 1;
                continue;
            }
            stages[k - 1].push(TrainingPair {
                stage: k,
                source_id: doc.id.clone(),
                input,
                target,
                noised: false,
            });
        }
    }
    StagePairs {
        stages,
        dropped_empty: dropped,
    }
}

pub fn write_pairs(path: &Path, pairs: &[TrainingPair]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for p in pairs {
        serde_json::to_writer(&mut out, p).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = serde_json::from_str(&line).map_err(|e| StagingError::BadPairFile {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}
