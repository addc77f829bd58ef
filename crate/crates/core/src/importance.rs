//! Domain word importance and nested stage vocabularies.
//!
//! A word's importance is its TF-IDF score averaged over the documents that
//! contain it, with `tf = count / |d|` and `idf = ln(N / DF)`. Stage
//! vocabularies are importance-ranked prefixes sized by how much of the
//! corpus' token occurrences they cover.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{escape_token, unescape_token, Corpus, BOUNDARY};

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error("word {0:?} does not occur in the document")]
    WordNotInDocument(String),
    #[error("word {0:?} does not occur in the corpus")]
    WordNotInCorpus(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid stage plan: {0}")]
    InvalidPlan(String),
    #[error("vocabulary file {path}: {message}")]
    BadVocabFile { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ImportanceError>;

/// Document frequencies over a corpus, the context `tf_idf` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentFrequency {
    pub n_docs: usize,
    pub df: HashMap<String, usize>,
}

impl DocumentFrequency {
    pub fn from_sequences<S: AsRef<[String]>>(docs: &[S]) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let distinct: BTreeSet<&String> = doc.as_ref().iter().collect();
            for w in distinct {
                *df.entry(w.clone()).or_default() += 1;
            }
        }
        Self {
            n_docs: docs.len(),
            df,
        }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_sequences(&corpus.token_sequences())
    }

    pub fn get(&self, word: &str) -> usize {
        self.df.get(word).copied().unwrap_or(0)
    }

    /// `ln(N / DF)`; `None` for words absent from every document.
    pub fn idf(&self, word: &str) -> Option<f64> {
        match self.get(word) {
            0 => None,
            df => Some((self.n_docs as f64 / df as f64).ln()),
        }
    }
}

pub fn tf_idf(word: &str, doc: &[String], df: &DocumentFrequency) -> Result<f64> {
    let count = doc.iter().filter(|t| *t == word).count();
    if count == 0 {
        return Err(ImportanceError::WordNotInDocument(word.to_string()));
    }
    let idf = df
        .idf(word)
        .ok_or_else(|| ImportanceError::WordNotInDocument(word.to_string()))?;
    Ok(count as f64 / doc.len() as f64 * idf)
}

/// Per-word accumulator: occurrence counts grouped by document length.
///
/// Summing `C_L / L` over ascending `L` makes the aggregate independent of
/// document order, and scaling every count by 2 scales the sum exactly.
#[derive(Debug, Default, Clone)]
struct TermAccumulator {
    by_length: BTreeMap<usize, u64>,
    doc_freq: usize,
    corpus_freq: u64,
}

impl TermAccumulator {
    fn add(&mut self, count: u64, doc_len: usize) {
        *self.by_length.entry(doc_len).or_default() += count;
        self.doc_freq += 1;
        self.corpus_freq += count;
    }

    fn importance(&self, n_docs: usize) -> f64 {
        let tf_sum: f64 = self
            .by_length
            .iter()
            .map(|(&len, &c)| c as f64 / len as f64)
            .sum();
        let idf = (n_docs as f64 / self.doc_freq as f64).ln();
        idf * tf_sum / self.doc_freq as f64
    }
}

fn accumulate<'a>(
    docs: impl Iterator<Item = &'a [String]>,
    only: Option<&str>,
) -> (BTreeMap<String, TermAccumulator>, usize) {
    let mut acc: BTreeMap<String, TermAccumulator> = BTreeMap::new();
    let mut n_docs = 0;
    for doc in docs {
        n_docs += 1;
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for t in doc {
            if only.is_none_or(|w| w == t) {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        for (w, c) in counts {
            acc.entry(w.to_string()).or_default().add(c, doc.len());
        }
    }
    (acc, n_docs)
}

/// Average TF-IDF of `word` over the documents of `corpus` containing it.
pub fn importance(word: &str, corpus: &Corpus) -> Result<f64> {
    let (acc, n_docs) = accumulate(
        corpus.documents().iter().map(|d| d.tokens.as_slice()),
        Some(word),
    );
    acc.get(word)
        .map(|a| a.importance(n_docs))
        .ok_or_else(|| ImportanceError::WordNotInCorpus(word.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordStats {
    pub importance: f64,
    pub doc_freq: usize,
    pub corpus_freq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceTable {
    pub entries: BTreeMap<String, WordStats>,
    pub corpus_size: usize,
}

impl ImportanceTable {
    pub fn get(&self, word: &str) -> Option<&WordStats> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All words by importance descending; ties by corpus frequency
    /// descending, then lexicographically.
    pub fn ranking(&self) -> Vec<String> {
        let mut words: Vec<(&String, &WordStats)> = self.entries.iter().collect();
        words.sort_by(|(wa, a), (wb, b)| {
            b.importance
                .partial_cmp(&a.importance)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.corpus_freq.cmp(&a.corpus_freq))
                .then_with(|| wa.cmp(wb))
        });
        words.into_iter().map(|(w, _)| w.clone()).collect()
    }
}

pub fn build_importance_table(corpus: &Corpus) -> Result<ImportanceTable> {
    if corpus.is_empty() {
        return Err(ImportanceError::EmptyCorpus);
    }
    let (acc, n_docs) = accumulate(corpus.documents().iter().map(|d| d.tokens.as_slice()), None);
    let entries = acc
        .into_iter()
        .map(|(w, a)| {
            let stats = WordStats {
                importance: a.importance(n_docs),
                doc_freq: a.doc_freq,
                corpus_freq: a.corpus_freq,
            };
            (w, stats)
        })
        .collect();
    Ok(ImportanceTable {
        entries,
        corpus_size: n_docs,
    })
}

/// Fraction of token occurrences in `corpus` whose token is in `vocab`.
pub fn coverage(vocab: &BTreeSet<String>, corpus: &Corpus) -> f64 {
    let total = corpus.total_tokens();
    if total == 0 {
        return 0.0;
    }
    let hit: usize = corpus
        .documents()
        .iter()
        .map(|d| d.tokens.iter().filter(|t| vocab.contains(*t)).count())
        .sum();
    hit as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub coverage_targets: Vec<f64>,
    #[serde(default = "default_always_include")]
    pub always_include: BTreeSet<String>,
}

fn default_always_include() -> BTreeSet<String> {
    BTreeSet::from([BOUNDARY.to_string()])
}

impl StagePlan {
    pub fn new(coverage_targets: Vec<f64>) -> Result<Self> {
        let plan = Self {
            coverage_targets,
            always_include: default_always_include(),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Coverage schedules for K = 1..=4.
    pub fn preset(stages: usize) -> Result<Self> {
        let targets = match stages {
            1 => vec![1.0],
            2 => vec![0.25, 1.0],
            3 => vec![0.15, 0.25, 1.0],
            4 => vec![0.15, 0.20, 0.25, 1.0],
            k => {
                return Err(ImportanceError::InvalidPlan(format!(
                    "no preset for {k} stages"
                )))
            }
        };
        Self::new(targets)
    }

    pub fn stages(&self) -> usize {
        self.coverage_targets.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.coverage_targets;
        if t.is_empty() {
            return Err(ImportanceError::InvalidPlan("at least one stage".into()));
        }
        if t.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(ImportanceError::InvalidPlan(
                "coverage targets must lie in (0, 1]".into(),
            ));
        }
        if t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ImportanceError::InvalidPlan(
                "coverage targets must be strictly increasing".into(),
            ));
        }
        if *t.last().unwrap() != 1.0 {
            return Err(ImportanceError::InvalidPlan(
                "final coverage target must be 1.0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageVocabulary {
    pub stages: Vec<BTreeSet<String>>,
    pub ranking: Vec<String>,
    pub achieved_coverage: Vec<f64>,
    /// Special tokens actually present in the corpus.
    pub always_include: BTreeSet<String>,
}

impl StageVocabulary {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Vocabulary of stage `k` (1-based).
    pub fn stage(&self, k: usize) -> &BTreeSet<String> {
        &self.stages[k - 1]
    }

    pub fn full(&self) -> &BTreeSet<String> {
        self.stages.last().expect("at least one stage")
    }
}

pub fn build_stage_vocabularies(
    table: &ImportanceTable,
    corpus: &Corpus,
    plan: &StagePlan,
) -> Result<StageVocabulary> {
    plan.validate()?;
    let ranking = table.ranking();
    let always: BTreeSet<String> = plan
        .always_include
        .iter()
        .filter(|t| table.entries.contains_key(*t))
        .cloned()
        .collect();

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for d in corpus.documents() {
        for t in &d.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let total = corpus.total_tokens();
    let cov = |hits: u64| {
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    };

    let ranked: Vec<&String> = ranking.iter().filter(|w| !always.contains(*w)).collect();
    let mut hits: u64 = always.iter().map(|w| freq.get(w.as_str()).copied().unwrap_or(0)).sum();
    let mut prefix = 0usize;
    let mut stages = Vec::with_capacity(plan.stages());
    let mut achieved = Vec::with_capacity(plan.stages());
    let k_last = plan.stages() - 1;

    for (k, &target) in plan.coverage_targets.iter().enumerate() {
        if k == k_last {
            prefix = ranked.len();
            hits = total as u64;
        } else {
            while cov(hits) < target {
                let w = ranked
                    .get(prefix)
                    .expect("coverage target unreachable with full vocabulary");
                hits += freq.get(w.as_str()).copied().unwrap_or(0);
                prefix += 1;
            }
        }
        let mut set = always.clone();
        set.extend(ranked[..prefix].iter().map(|w| (*w).clone()));
        achieved.push(cov(hits));
        stages.push(set);
    }

    Ok(StageVocabulary {
        stages,
        ranking,
        achieved_coverage: achieved,
        always_include: always,
    })
}

/// Manifest describing a set of written vocabulary files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stages: usize,
    pub coverage_targets: Vec<f64>,
    pub achieved_coverage: Vec<f64>,
    pub files: Vec<String>,
    pub always_include: Vec<String>,
    pub tf_idf_variant: String,
    pub sizing: String,
    pub tokenizer_digest: String,
    pub corpus_digest: String,
}

pub fn stage_file_name(k: usize) -> String {
    format!("stage-{k}.tsv")
}

/// Writes one `rank\ttoken\timportance\tdoc_freq` file per stage plus
/// `manifest.json` into `dir`. Ranks are 1-based positions in the full
/// ranking.
pub fn write_vocabularies(
    dir: &Path,
    vocab: &StageVocabulary,
    table: &ImportanceTable,
    plan: &StagePlan,
    tokenizer_digest: &str,
    corpus_digest: &str,
) -> Result<StageManifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (idx, set) in vocab.stages.iter().enumerate() {
        let name = stage_file_name(idx + 1);
        let mut out = std::io::BufWriter::new(fs::File::create(dir.join(&name))?);
        for (rank, w) in vocab.ranking.iter().enumerate() {
            if !set.contains(w) {
                continue;
            }
            let stats = &table.entries[w];
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                rank + 1,
                escape_token(w),
                stats.importance,
                stats.doc_freq
            )?;
        }
        out.flush()?;
        files.push(name);
    }
    let manifest = StageManifest {
        stages: vocab.num_stages(),
        coverage_targets: plan.coverage_targets.clone(),
        achieved_coverage: vocab.achieved_coverage.clone(),
        files,
        always_include: vocab.always_include.iter().cloned().collect(),
        tf_idf_variant: "tf=count/len, idf=ln(N/DF)".into(),
        sizing: "token-occurrence coverage".into(),
        tokenizer_digest: tokenizer_digest.to_string(),
        corpus_digest: corpus_digest.to_string(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<StageManifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| ImportanceError::BadVocabFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads vocabulary files written by [`write_vocabularies`].
pub fn read_vocabularies(dir: &Path) -> Result<(StageManifest, StageVocabulary)> {
    let manifest = read_manifest(dir)?;
    let mut stages = Vec::new();
    let mut ranked: BTreeMap<usize, String> = BTreeMap::new();
    for name in &manifest.files {
        let path = dir.join(name);
        let bad = |message: String| ImportanceError::BadVocabFile {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(&path)?;
        let mut set = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", i + 1)));
            }
            let rank: usize = fields[0]
                .parse()
                .map_err(|_| bad(format!("line {}: bad rank", i + 1)))?;
            let token = unescape_token(fields[1])
                .ok_or_else(|| bad(format!("line {}: bad escape", i + 1)))?;
            ranked.insert(rank, token.clone());
            set.insert(token);
        }
        stages.push(set);
    }
    let vocab = StageVocabulary {
        stages,
        ranking: ranked.into_values().collect(),
        achieved_coverage: manifest.achieved_coverage.clone(),
        always_include: manifest.always_include.iter().cloned().collect(),
    };
    Ok((manifest, vocab))
}
