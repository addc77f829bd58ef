//! Corpus ingestion, tokenization, splitting and shared n-gram counting.
//!
//! Documents are word-level token sequences. Punctuation characters become
//! their own tokens and sentence/paragraph breaks are kept as the literal
//! token `"\n"` so that later stages can keep skeleton structure.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The sentence-boundary token.
pub const BOUNDARY: &str = "\n";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("invalid tokenizer config: {0}")]
    InvalidConfig(String),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub keep_sentence_boundary: bool,
    pub min_doc_tokens: usize,
    pub max_doc_tokens: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            keep_sentence_boundary: true,
            min_doc_tokens: 1,
            max_doc_tokens: 1_000_000,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_doc_tokens < 1 {
            return Err(CorpusError::InvalidConfig(
                "min_doc_tokens must be at least 1".into(),
            ));
        }
        if self.max_doc_tokens < self.min_doc_tokens {
            return Err(CorpusError::InvalidConfig(
                "max_doc_tokens must be >= min_doc_tokens".into(),
            ));
        }
        Ok(())
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
        )
}

/// Splits raw text into word, punctuation and boundary tokens.
///
/// Whitespace runs separate tokens; a run containing a newline becomes a
/// single `"\n"` token when boundaries are kept.
pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut pending_boundary = false;

    let flush_word = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            let w = std::mem::take(word);
            tokens.push(if cfg.lowercase { w.to_lowercase() } else { w });
        }
    };

    for c in text.chars() {
        if c.is_whitespace() {
            flush_word(&mut word, &mut tokens);
            if c == '\n' {
                pending_boundary = true;
            }
            continue;
        }
        if pending_boundary {
            if cfg.keep_sentence_boundary {
                tokens.push(BOUNDARY.to_string());
            }
            pending_boundary = false;
        }
        if is_punctuation(c) {
            flush_word(&mut word, &mut tokens);
            tokens.push(c.to_string());
        } else {
            word.push(c);
        }
    }
    flush_word(&mut word, &mut tokens);
    if pending_boundary && cfg.keep_sentence_boundary {
        tokens.push(BOUNDARY.to_string());
    }
    tokens
}

/// Joins tokens back into text that re-tokenizes to the same sequence.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub condition: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            id: id.into(),
            tokens,
            condition: Vec::new(),
        }
    }

    pub fn with_condition(mut self, condition: Vec<String>) -> Self {
        self.condition = condition;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    pub split: Split,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate document ids.
    pub fn new(documents: Vec<Document>, split: Split) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::DuplicateId(d.id.clone()));
            }
        }
        Ok(Self { documents, split })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_sequences(&self) -> Vec<&[String]> {
        self.documents.iter().map(|d| d.tokens.as_slice()).collect()
    }

    pub fn total_tokens(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }
}

/// Counts from a corpus load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: usize,
    pub kept: usize,
    pub dropped_short: usize,
    pub dropped_long: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    JsonLines,
    PlainText,
}

impl CorpusFormat {
    /// `.jsonl`/`.json` files are JSON-lines; everything else is plain text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::JsonLines,
            _ => CorpusFormat::PlainText,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

pub fn load_corpus(
    path: &Path,
    cfg: &TokenizerConfig,
    split: Split,
) -> Result<(Corpus, LoadReport)> {
    load_corpus_as(path, CorpusFormat::from_path(path), cfg, split)
}

pub fn load_corpus_as(
    path: &Path,
    format: CorpusFormat,
    cfg: &TokenizerConfig,
    split: Split,
) -> Result<(Corpus, LoadReport)> {
    cfg.validate()?;
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);

    let mut report = LoadReport::default();
    let mut documents = Vec::new();
    let mut ids = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = idx + 1;
        let (id, text, prompt) = match format {
            CorpusFormat::JsonLines => {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CorpusRecord =
                    serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                        line: lineno,
                        message: e.to_string(),
                    })?;
                (rec.id, rec.text, rec.prompt)
            }
            CorpusFormat::PlainText => (format!("doc-{lineno}"), line, None),
        };
        report.records += 1;
        if !ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        let tokens = tokenize(&text, cfg);
        if tokens.len() < cfg.min_doc_tokens {
            report.dropped_short += 1;
            continue;
        }
        if tokens.len() > cfg.max_doc_tokens {
            report.dropped_long += 1;
            continue;
        }
        let condition = prompt.map(|p| tokenize(&p, cfg)).unwrap_or_default();
        documents.push(Document {
            id,
            tokens,
            condition,
        });
    }
    report.kept = documents.len();
    Ok((Corpus::new(documents, split)?, report))
}

/// Writes documents as JSON-lines corpus records.
pub fn write_corpus(path: &Path, documents: &[Document]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for d in documents {
        let rec = CorpusRecord {
            id: d.id.clone(),
            text: detokenize(&d.tokens),
            prompt: (!d.condition.is_empty()).then(|| detokenize(&d.condition)),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Shuffles by seed and partitions into (train, dev, test).
///
/// Dev and test sizes are `floor(n * ratio)`; the remainder goes to train.
pub fn split_corpus(corpus: Corpus, ratios: [f64; 3], seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CorpusError::InvalidRatios(format!(
            "ratios must be nonnegative, got {ratios:?}"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidRatios(format!(
            "ratios must sum to 1, got {sum}"
        )));
    }
    let mut docs = corpus.into_documents();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    docs.shuffle(&mut rng);

    let n = docs.len();
    let part = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_dev = part(ratios[1]).min(n);
    let n_test = part(ratios[2]).min(n - n_dev);
    let n_train = n - n_dev - n_test;

    let test = docs.split_off(n_train + n_dev);
    let dev = docs.split_off(n_train);
    Ok((
        Corpus::new(docs, Split::Train)?,
        Corpus::new(dev, Split::Dev)?,
        Corpus::new(test, Split::Test)?,
    ))
}

/// Counts of contiguous n-grams across a set of token sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramProfile {
    pub n: usize,
    pub counts: BTreeMap<Vec<String>, u64>,
    pub total: u64,
}

impl NgramProfile {
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn get(&self, gram: &[String]) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

pub fn ngram_profile<S: AsRef<[String]>>(docs: &[S], n: usize) -> Result<NgramProfile> {
    if n == 0 {
        return Err(CorpusError::ZeroOrder);
    }
    let mut counts: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    let mut total = 0;
    for doc in docs {
        for w in doc.as_ref().windows(n) {
            // lookup by slice first to avoid allocating for known grams
            if let Some(c) = counts.get_mut(w) {
                *c += 1;
            } else {
                counts.insert(w.to_vec(), 1);
            }
            total += 1;
        }
    }
    Ok(NgramProfile { n, counts, total })
}

/// Escapes a token for line-oriented files (newline, tab, backslash).
pub fn escape_token(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_token(escaped: &str) -> Option<String> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next()? {
                '\\' => out.push('\\'),
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                _ => return None,
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}
