//! Automatic evaluation: n-gram overlap (MSJ, BLEU in both directions),
//! TF-IDF distance and Fréchet distance over document embeddings.

mod frechet;
mod ngram;
mod tfidf;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Corpus;

pub use frechet::{fbd, frechet_distance, gaussian_stats, EmbeddingSet, FrechetResult, GaussianStats};
pub use ngram::{
    backward_bleu, bleu_scores, corpus_bleu, forward_bleu, harmonic_bleu, harmonic_mean, msj, BleuScores,
};
pub use tfidf::{tid, FallbackEmbedder, TfIdfSpace, FALLBACK_LABEL};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("n-gram order must be >= 1, got {0}")]
    InvalidOrder(usize),
    #[error("empty document set ({0})")]
    EmptySet(&'static str),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("embedding label mismatch: {0:?} vs {1:?}")]
    LabelMismatch(String, String),
    #[error("need at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("{path}:{line}: {message}")]
    BadEmbeddingFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Externally computed embeddings for one FBD label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSource {
    pub label: String,
    pub generated: PathBuf,
    pub reference: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub orders: Vec<usize>,
    pub tid_scale: f64,
    /// Covariance regularizer for FBD.
    pub epsilon: f64,
    pub fallback_embedder: bool,
    pub fallback_dim: usize,
    pub embeddings: Vec<EmbeddingSource>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            orders: vec![2, 3, 4, 5],
            tid_scale: 100.0,
            epsilon: 1e-6,
            fallback_embedder: true,
            fallback_dim: 32,
            embeddings: Vec::new(),
        }
    }
}

impl MetricConfig {
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbdMeta {
    pub dim: usize,
    pub generated_vectors: usize,
    pub reference_vectors: usize,
    /// Fewer than `dim + 1` vectors on a side: the regularizer dominates.
    pub rank_deficient: bool,
    pub eigen_clamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub generated_docs: usize,
    pub reference_docs: usize,
    pub generated_tokens: usize,
    pub reference_tokens: usize,
    pub tid_scale: f64,
    pub fbd: BTreeMap<String, FbdMeta>,
    pub warnings: Vec<String>,
    pub config_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub msj: BTreeMap<String, f64>,
    pub f_bleu: BTreeMap<String, f64>,
    pub b_bleu: BTreeMap<String, f64>,
    pub ha_bleu: BTreeMap<String, f64>,
    pub tid: f64,
    pub fbd: BTreeMap<String, f64>,
    pub meta: ReportMeta,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Fixed-width summary table.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:>10}{:>10}{:>10}{:>10}", "n", "MSJ", "F-BLEU", "B-BLEU", "HA-BLEU");
        for (n, m) in &self.msj {
            let _ = writeln!(
                s,
                "{:<8}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
                n, m, self.f_bleu[n], self.b_bleu[n], self.ha_bleu[n]
            );
        }
        let _ = writeln!(s, "TID (x{}) {:.4}", self.meta.tid_scale, self.tid);
        for (label, v) in &self.fbd {
            let _ = writeln!(s, "FBD[{label}] {v:.4}");
        }
        for w in &self.meta.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

fn fbd_entry(
    report: &mut MetricReport,
    generated: &EmbeddingSet,
    reference: &EmbeddingSet,
    epsilon: f64,
) -> Result<()> {
    let label = reference.label.clone();
    if generated.len() < 2 || reference.len() < 2 {
        report.meta.warnings.push(format!(
            "fbd[{label}] omitted: {} generated / {} reference vectors",
            generated.len(),
            reference.len()
        ));
        return Ok(());
    }
    let r = fbd(generated, reference, epsilon)?;
    let rank_deficient = generated.len() <= reference.dim || reference.len() <= reference.dim;
    if rank_deficient {
        report
            .meta
            .warnings
            .push(format!("fbd[{label}]: fewer than dim+1 vectors, covariance is regularizer-dominated"));
    }
    if r.clamped > 1e-6 {
        report
            .meta
            .warnings
            .push(format!("fbd[{label}]: clamped negative eigenvalue of magnitude {:e}", r.clamped));
    }
    report.fbd.insert(label.clone(), r.distance);
    report.meta.fbd.insert(
        label,
        FbdMeta {
            dim: reference.dim,
            generated_vectors: generated.len(),
            reference_vectors: reference.len(),
            rank_deficient,
            eigen_clamp: r.clamped,
        },
    );
    Ok(())
}

/// Scores `generated` against `reference` (the test set).
pub fn evaluate(generated: &Corpus, reference: &Corpus, cfg: &MetricConfig) -> Result<MetricReport> {
    if generated.is_empty() {
        return Err(MetricError::EmptySet("generated"));
    }
    if reference.is_empty() {
        return Err(MetricError::EmptySet("reference"));
    }
    let gen = sorted_sequences(generated);
    let refs = sorted_sequences(reference);

    let mut report = MetricReport {
        msj: BTreeMap::new(),
        f_bleu: BTreeMap::new(),
        b_bleu: BTreeMap::new(),
        ha_bleu: BTreeMap::new(),
        tid: 0.0,
        fbd: BTreeMap::new(),
        meta: ReportMeta {
            generated_docs: generated.len(),
            reference_docs: reference.len(),
            generated_tokens: generated.total_tokens(),
            reference_tokens: reference.total_tokens(),
            tid_scale: cfg.tid_scale,
            fbd: BTreeMap::new(),
            warnings: Vec::new(),
            config_sha256: cfg.digest(),
        },
    };
    for &n in &cfg.orders {
        let key = n.to_string();
        report.msj.insert(key.clone(), msj(&gen, &refs, n)?);
        let b = bleu_scores(&gen, &refs, n)?;
        report.f_bleu.insert(key.clone(), b.forward);
        report.b_bleu.insert(key.clone(), b.backward);
        report.ha_bleu.insert(key, b.harmonic);
    }

    let space = TfIdfSpace::fit(reference)?;
    report.tid = tfidf::tid_in(&space, generated, reference) * cfg.tid_scale;

    if cfg.fallback_embedder {
        let embedder = space.fallback_embedder(reference, cfg.fallback_dim);
        if embedder.dim() == 0 {
            report.meta.warnings.push("fbd[tfidf-fallback] omitted: no reference features".into());
        } else {
            fbd_entry(&mut report, &embedder.embed(generated), &embedder.embed(reference), cfg.epsilon)?;
        }
    }
    for src in &cfg.embeddings {
        if !src.generated.is_file() || !src.reference.is_file() {
            report
                .meta
                .warnings
                .push(format!("fbd[{}] omitted: embedding file missing", src.label));
            continue;
        }
        let g = EmbeddingSet::read(&src.generated)?;
        let r = EmbeddingSet::read(&src.reference)?;
        for e in [&g, &r] {
            if e.label != src.label {
                return Err(MetricError::LabelMismatch(src.label.clone(), e.label.clone()));
            }
        }
        fbd_entry(&mut report, &g, &r, cfg.epsilon)?;
    }
    if report.fbd.is_empty() {
        report.meta.warnings.push("no embeddings available: fbd not computed".into());
    }
    Ok(report)
}

fn sorted_sequences(c: &Corpus) -> Vec<&[String]> {
    let mut docs: Vec<_> = c.documents().iter().collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    docs.into_iter().map(|d| d.tokens.as_slice()).collect()
}
