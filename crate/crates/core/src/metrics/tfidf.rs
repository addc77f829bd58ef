use std::collections::{BTreeMap, HashMap};

use super::frechet::EmbeddingSet;
use super::{MetricError, Result};
use crate::corpus::Corpus;
use crate::importance::DocumentFrequency;

/// Label of embeddings produced by [`TfIdfSpace::fallback_embedder`].
pub const FALLBACK_LABEL: &str = "tfidf-fallback";

/// TF-IDF feature space fixed by a reference corpus: one dimension per
/// reference word (sorted), idf = `ln(N / DF)` over the reference.
#[derive(Debug, Clone)]
pub struct TfIdfSpace {
    words: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdfSpace {
    pub fn fit(reference: &Corpus) -> Result<Self> {
        if reference.is_empty() {
            return Err(MetricError::EmptySet("reference"));
        }
        let df = DocumentFrequency::from_corpus(reference);
        let mut words: Vec<String> = df.df.keys().cloned().collect();
        words.sort();
        let idf = words.iter().map(|w| df.idf(w).unwrap_or(0.0)).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self { words, index, idf })
    }

    pub fn dim(&self) -> usize {
        self.words.len()
    }

    /// Sparse tf-idf vector of one document, sorted by dimension. Tokens
    /// outside the reference vocabulary count toward `|d|` only.
    pub fn vectorize(&self, doc: &[String]) -> Vec<(usize, f64)> {
        if doc.is_empty() {
            return Vec::new();
        }
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for t in doc {
            if let Some(&i) = self.index.get(t) {
                *counts.entry(i).or_default() += 1;
            }
        }
        let len = doc.len() as f64;
        counts
            .into_iter()
            .map(|(i, c)| (i, c as f64 / len * self.idf[i]))
            .collect()
    }

    /// Mean tf-idf vector, documents summed in id order.
    pub fn mean_vector(&self, set: &Corpus) -> Vec<f64> {
        let mut docs: Vec<_> = set.documents().iter().collect();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        let mut sum = vec![0.0; self.dim()];
        for d in &docs {
            for (i, v) in self.vectorize(&d.tokens) {
                sum[i] += v;
            }
        }
        let n = docs.len().max(1) as f64;
        sum.iter_mut().for_each(|x| *x /= n);
        sum
    }

    /// Embedder projecting documents onto the `dim` reference words with
    /// the largest total tf-idf mass (ties by word).
    pub fn fallback_embedder(&self, reference: &Corpus, dim: usize) -> FallbackEmbedder {
        let mut docs: Vec<_> = reference.documents().iter().collect();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        let mut mass = vec![0.0; self.dim()];
        for d in &docs {
            for (i, v) in self.vectorize(&d.tokens) {
                mass[i] += v;
            }
        }
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
        order.truncate(dim);
        FallbackEmbedder {
            space: self.clone(),
            dims: order,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FallbackEmbedder {
    space: TfIdfSpace,
    dims: Vec<usize>,
}

impl FallbackEmbedder {
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn words(&self) -> Vec<&str> {
        self.dims.iter().map(|&i| self.space.words[i].as_str()).collect()
    }

    pub fn embed(&self, set: &Corpus) -> EmbeddingSet {
        let pos: HashMap<usize, usize> = self.dims.iter().enumerate().map(|(j, &i)| (i, j)).collect();
        let vectors = set
            .documents()
            .iter()
            .map(|d| {
                let mut v = vec![0.0; self.dims.len()];
                for (i, x) in self.space.vectorize(&d.tokens) {
                    if let Some(&j) = pos.get(&i) {
                        v[j] = x;
                    }
                }
                (d.id.clone(), v)
            })
            .collect();
        EmbeddingSet {
            dim: self.dims.len(),
            label: FALLBACK_LABEL.to_string(),
            vectors,
        }
    }
}

/// Scaled Euclidean distance between the mean tf-idf vectors of two sets,
/// with idf taken from `reference`.
pub fn tid(a: &Corpus, b: &Corpus, reference: &Corpus, scale: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet("tid"));
    }
    let space = TfIdfSpace::fit(reference)?;
    Ok(tid_in(&space, a, b) * scale)
}

pub(crate) fn tid_in(space: &TfIdfSpace, a: &Corpus, b: &Corpus) -> f64 {
    let ma = space.mean_vector(a);
    let mb = space.mean_vector(b);
    ma.iter()
        .zip(&mb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
