//! End-to-end orchestration.
//!
//! Every step writes its artifacts under one output directory and records a
//! [`StepRecord`] in `run-manifest.json`:
//!
//! ```text
//! data/{train,dev,test}.jsonl        tokenized splits
//! vocab/stage-<k>.tsv, manifest.json stage vocabularies
//! pairs/stage-<k>.{clean,noised}.jsonl
//! models/stage-<k>.model
//! generated/<mode>.jsonl, <mode>.traces.jsonl
//! reports/<name>.{json,txt}
//! ```
//!
//! A step's key is the digest of its parameters and input digests. `run`
//! skips a step whose recorded key matches and whose outputs are intact;
//! evaluation always re-runs.

mod config;
mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{load_corpus, split_corpus, write_corpus, Corpus, CorpusError, Document, Split};
use crate::genmodel::{
    generate, gold_plan_generate, load_planner, load_refiner, save_planner, save_refiner, train_planner,
    train_refiner, GenerationTrace, ModelError, StageGenerator,
};
use crate::importance::{
    build_importance_table, build_stage_vocabularies, read_vocabularies, stage_file_name, write_vocabularies,
    ImportanceError, StageVocabulary,
};
use crate::metrics::{evaluate, MetricError, MetricReport};
use crate::staging::{make_pairs, noise_pairs, read_pairs, write_pairs, StagingError};

pub use config::{CorpusConfig, GenerationConfig, GenerationMode, Overrides, RunConfig};
pub use manifest::{file_digest, json_digest, sha256_hex, RunManifest, StepRecord, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing input file {0}")]
    MissingFile(PathBuf),
    #[error("stale artifact: {0}")]
    StaleArtifact(String),
    #[error("missing condition: {0}")]
    MissingCondition(String),
    #[error("stage {0} has no training pairs")]
    EmptyStage(usize),
    #[error("step {step} failed (see {}): {source}", manifest.display())]
    Step {
        step: String,
        manifest: PathBuf,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
    #[error(transparent)]
    Staging(#[from] StagingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Short machine-readable error name.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "InvalidConfig",
            PipelineError::MissingFile(_) => "MissingFile",
            PipelineError::StaleArtifact(_) => "StaleArtifact",
            PipelineError::MissingCondition(_) => "MissingCondition",
            PipelineError::EmptyStage(_) => "EmptyStage",
            PipelineError::Step { source, .. } => source.kind(),
            PipelineError::Corpus(_) => "CorpusError",
            PipelineError::Importance(_) => "VocabularyError",
            PipelineError::Staging(_) => "StagingError",
            PipelineError::Model(ModelError::Corrupt(_)) => "CorruptModel",
            PipelineError::Model(ModelError::VersionMismatch { .. }) => "VersionMismatch",
            PipelineError::Model(ModelError::KindMismatch { .. }) => "KindMismatch",
            PipelineError::Model(_) => "ModelError",
            PipelineError::Metric(_) => "MetricError",
            PipelineError::Io { .. } => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

const SPLITS: [(&str, Split); 3] = [("train", Split::Train), ("dev", Split::Dev), ("test", Split::Test)];

fn data_file(name: &str) -> String {
    format!("data/{name}.jsonl")
}

fn vocab_files(stages: usize) -> Vec<String> {
    std::iter::once("vocab/manifest.json".to_string())
        .chain((1..=stages).map(|k| format!("vocab/{}", stage_file_name(k))))
        .collect()
}

fn pair_file(k: usize, kind: &str) -> String {
    format!("pairs/stage-{k}.{kind}.jsonl")
}

fn model_file(k: usize) -> String {
    format!("models/stage-{k}.model")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Default)]
struct StepOutput {
    outputs: Vec<String>,
    read_sets: BTreeMap<String, Vec<String>>,
    notes: Vec<String>,
}

/// One line of a traces file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    pub mode: String,
    pub condition: Vec<String>,
    pub stage_outputs: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: Vec<(String, StepRecord)>,
    pub report: MetricReport,
    pub report_path: PathBuf,
}

/// A validated config bound to its output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    stages: usize,
    config_sha256: String,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate_values()?;
        let out = cfg.out_dir();
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok(Self {
            stages: cfg.num_stages()?,
            config_sha256: json_digest(&cfg),
            out,
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn input_digest(&self, rel: &str) -> Result<String> {
        let p = self.path(rel);
        if !p.is_file() {
            return Err(PipelineError::MissingFile(p));
        }
        file_digest(&p)
    }

    fn inputs(&self, rels: &[String]) -> Result<BTreeMap<String, String>> {
        rels.iter().map(|r| Ok((r.clone(), self.input_digest(r)?))).collect()
    }

    fn ensure_dir(&self, rel: &str) -> Result<()> {
        let p = self.path(rel);
        fs::create_dir_all(&p).map_err(io_err(&p))
    }

    fn step(
        &self,
        name: &str,
        params: serde_json::Value,
        inputs: BTreeMap<String, String>,
        use_cache: bool,
        body: impl FnOnce() -> Result<StepOutput>,
    ) -> Result<StepRecord> {
        let key = json_digest(&json!({ "step": name, "params": params, "inputs": inputs }));
        let mut manifest = RunManifest::load_or_new(&self.out, &self.config_sha256)?;
        if use_cache {
            if let Some(rec) = manifest.reusable(name, &key, &self.out) {
                let rec = StepRecord {
                    cached: true,
                    seconds: 0.0,
                    ..rec.clone()
                };
                log::info!("{name}: cached");
                manifest.steps.insert(name.to_string(), rec.clone());
                manifest.save(&self.out)?;
                return Ok(rec);
            }
        }
        log::info!("{name}: running");
        let start = Instant::now();
        let out = body()?;
        let outputs = out
            .outputs
            .iter()
            .map(|rel| Ok((rel.clone(), file_digest(&self.path(rel))?)))
            .collect::<Result<_>>()?;
        let rec = StepRecord {
            key,
            inputs,
            outputs,
            read_sets: out.read_sets,
            notes: out.notes,
            cached: false,
            seconds: start.elapsed().as_secs_f64(),
        };
        manifest.steps.insert(name.to_string(), rec.clone());
        manifest.save(&self.out)?;
        Ok(rec)
    }

    fn load_split(&self, name: &str, split: Split) -> Result<Corpus> {
        Ok(load_corpus(&self.path(&data_file(name)), &self.cfg.tokenizer, split)?.0)
    }

    fn load_vocab(&self) -> Result<StageVocabulary> {
        let (_, vocab) = read_vocabularies(&self.path("vocab"))?;
        if vocab.num_stages() != self.stages {
            return Err(PipelineError::StaleArtifact(format!(
                "vocabulary has {} stages, config asks for {}",
                vocab.num_stages(),
                self.stages
            )));
        }
        Ok(vocab)
    }

    /// Splits the corpus into `data/` and builds stage vocabularies from the
    /// training split.
    pub fn build_vocab(&self, use_cache: bool) -> Result<StepRecord> {
        self.cfg.check_inputs()?;
        let plan = self.cfg.stage_plan()?;
        let c = &self.cfg.corpus;
        let mut inputs = BTreeMap::new();
        inputs.insert("source:train".to_string(), file_digest(&self.cfg.resolve(&c.train))?);
        if let (Some(dev), Some(test)) = (&c.dev, &c.test) {
            inputs.insert("source:dev".to_string(), file_digest(&self.cfg.resolve(dev))?);
            inputs.insert("source:test".to_string(), file_digest(&self.cfg.resolve(test))?);
        }
        let params = json!({
            "tokenizer": self.cfg.tokenizer,
            "split": c.split,
            "split_seed": c.split_seed,
            "plan": plan,
        });
        self.step("build-vocab", params, inputs, use_cache, || {
            let tok = &self.cfg.tokenizer;
            let (train, report) = load_corpus(&self.cfg.resolve(&c.train), tok, Split::Train)?;
            let mut notes = vec![format!(
                "source: {} records, {} kept, {} too short, {} too long",
                report.records, report.kept, report.dropped_short, report.dropped_long
            )];
            let (train, dev, test) = match (&c.dev, &c.test) {
                (Some(dev), Some(test)) => (
                    train,
                    load_corpus(&self.cfg.resolve(dev), tok, Split::Dev)?.0,
                    load_corpus(&self.cfg.resolve(test), tok, Split::Test)?.0,
                ),
                _ => split_corpus(train, c.split, c.split_seed)?,
            };
            self.ensure_dir("data")?;
            let mut outputs = Vec::new();
            for ((name, _), corpus) in SPLITS.iter().zip([&train, &dev, &test]) {
                let rel = data_file(name);
                let path = self.path(&rel);
                write_corpus(&path, corpus.documents()).map_err(io_err(&path))?;
                notes.push(format!("{name}: {} documents", corpus.len()));
                outputs.push(rel);
            }
            // build from the written split so later steps see identical tokens
            let train = self.load_split("train", Split::Train)?;
            let table = build_importance_table(&train)?;
            let vocab = build_stage_vocabularies(&table, &train, &plan)?;
            let manifest = write_vocabularies(
                &self.path("vocab"),
                &vocab,
                &table,
                &plan,
                &json_digest(tok),
                &file_digest(&self.path(&data_file("train")))?,
            )?;
            for (k, (size, cov)) in vocab.stages.iter().map(BTreeSet::len).zip(&manifest.achieved_coverage).enumerate() {
                notes.push(format!("stage {}: {size} words, coverage {cov:.4}", k + 1));
            }
            outputs.extend(vocab_files(self.stages));
            Ok(StepOutput {
                outputs,
                notes,
                ..Default::default()
            })
        })
    }

    /// Writes clean and noised training pairs for every stage.
    pub fn extract(&self, use_cache: bool) -> Result<StepRecord> {
        let mut rels = vec![data_file("train")];
        rels.extend(vocab_files(self.stages));
        let inputs = self.inputs(&rels)?;
        let params = json!({ "tokenizer": self.cfg.tokenizer, "noise": self.cfg.noise, "stages": self.stages });
        self.step("extract", params, inputs, use_cache, || {
            let (vman, _) = read_vocabularies(&self.path("vocab"))?;
            if vman.tokenizer_digest != json_digest(&self.cfg.tokenizer) {
                return Err(PipelineError::StaleArtifact(
                    "vocabulary was built with a different tokenizer config; rerun build-vocab".into(),
                ));
            }
            if vman.corpus_digest != file_digest(&self.path(&data_file("train")))? {
                return Err(PipelineError::StaleArtifact(
                    "vocabulary was built from a different training split; rerun build-vocab".into(),
                ));
            }
            let vocab = self.load_vocab()?;
            let train = self.load_split("train", Split::Train)?;
            let pairs = make_pairs(&train, &vocab);
            self.ensure_dir("pairs")?;
            let mut out = StepOutput::default();
            for k in 1..=self.stages {
                let clean = pairs.stage(k);
                let clean_rel = pair_file(k, "clean");
                write_pairs(&self.path(&clean_rel), clean)?;
                let noised = if k == 1 || self.cfg.noise.is_disabled() {
                    clean.to_vec()
                } else {
                    let (noised, disabled) = noise_pairs(clean, &self.cfg.noise)?;
                    if !disabled.is_empty() {
                        let msg = format!("stage {k}: noise orders {disabled:?} disabled (no such n-grams in inputs)");
                        log::warn!("{msg}");
                        out.notes.push(msg);
                    }
                    noised
                };
                let noised_rel = pair_file(k, "noised");
                write_pairs(&self.path(&noised_rel), &noised)?;
                out.notes.push(format!(
                    "stage {k}: {} pairs, {} dropped with empty target",
                    clean.len(),
                    pairs.dropped_empty[k - 1]
                ));
                out.outputs.push(clean_rel);
                out.outputs.push(noised_rel);
            }
            Ok(out)
        })
    }

    /// Trains the planner and refiners, one independent task per stage.
    pub fn train(&self, use_cache: bool) -> Result<StepRecord> {
        let rels: Vec<String> = (1..=self.stages).map(|k| pair_file(k, "noised")).collect();
        let inputs = self.inputs(&rels)?;
        let params = json!({ "generator": self.cfg.generator, "stages": self.stages });
        self.step("train", params, inputs, use_cache, || {
            self.ensure_dir("models")?;
            let g = &self.cfg.generator;
            let results: Vec<Result<()>> = (1..=self.stages)
                .into_par_iter()
                .map(|k| {
                    let pairs = read_pairs(&self.path(&pair_file(k, "noised")))?;
                    if pairs.is_empty() {
                        return Err(PipelineError::EmptyStage(k));
                    }
                    let path = self.path(&model_file(k));
                    if k == 1 {
                        save_planner(&train_planner(&pairs, g.planner_order, g.planner_smoothing())?, &path)?;
                    } else {
                        save_refiner(
                            &train_refiner(&pairs, k, g.refiner_order, g.refiner_smoothing())?,
                            &path,
                        )?;
                    }
                    Ok(())
                })
                .collect();
            results.into_iter().collect::<Result<Vec<()>>>()?;
            Ok(StepOutput {
                outputs: (1..=self.stages).map(model_file).collect(),
                read_sets: (1..=self.stages)
                    .map(|k| (format!("stage-{k}"), vec![pair_file(k, "noised")]))
                    .collect(),
                notes: Vec::new(),
            })
        })
    }

    /// Relative path of the generated corpus for `mode`.
    pub fn generated_file(mode: GenerationMode) -> String {
        format!("generated/{}.jsonl", mode.tag())
    }

    pub fn generate(&self, mode: GenerationMode, use_cache: bool) -> Result<StepRecord> {
        self.cfg.check_mode(mode, self.stages)?;
        let gen = &self.cfg.generation;
        let mut rels: Vec<String> = (1..=self.stages).map(model_file).collect();
        rels.extend(vocab_files(self.stages));
        if matches!(mode, GenerationMode::GoldPlan(_)) {
            rels.push(data_file("dev"));
        } else if gen.conditional {
            rels.push(data_file("test"));
        }
        let inputs = self.inputs(&rels)?;
        let params = json!({
            "tokenizer": self.cfg.tokenizer,
            "decoder": self.cfg.decoder,
            "mode": mode,
            "samples": gen.samples,
            "conditional": gen.conditional,
        });
        let name = format!("generate:{}", mode.tag());
        self.step(&name, params, inputs, use_cache, || {
            let vocab = self.load_vocab()?;
            let planner = load_planner(&self.path(&model_file(1)))?;
            let refiners = (2..=self.stages)
                .map(|k| load_refiner(&self.path(&model_file(k))))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut chain: Vec<&dyn StageGenerator> = vec![&planner];
            chain.extend(refiners.iter().map(|r| r as &dyn StageGenerator));
            let dec = &self.cfg.decoder;
            let rng = |i: usize| ChaCha8Rng::seed_from_u64(dec.seed ^ i as u64);

            let condition_of = |doc: &Document| -> Result<Vec<String>> {
                if !gen.conditional {
                    return Ok(Vec::new());
                }
                if doc.condition.is_empty() {
                    return Err(PipelineError::MissingCondition(format!(
                        "document {:?} has no prompt but generation is conditional",
                        doc.id
                    )));
                }
                Ok(doc.condition.clone())
            };

            let sorted = |c: Corpus| {
                let mut d = c.into_documents();
                d.sort_by(|a, b| a.id.cmp(&b.id));
                d
            };
            let results: Vec<Result<(Option<String>, GenerationTrace)>> = match mode {
                GenerationMode::Full => {
                    let prompts = if gen.conditional {
                        let docs = sorted(self.load_split("test", Split::Test)?);
                        if docs.is_empty() {
                            return Err(PipelineError::MissingCondition("test split has no prompts".into()));
                        }
                        docs
                    } else {
                        Vec::new()
                    };
                    (0..gen.samples)
                        .into_par_iter()
                        .map(|i| {
                            let (source, cond) = match prompts.get(i % prompts.len().max(1)) {
                                Some(d) => (Some(d.id.clone()), condition_of(d)?),
                                None => (None, Vec::new()),
                            };
                            let trace = generate(&chain, &vocab, &cond, dec, &mut rng(i))?;
                            Ok((source, trace))
                        })
                        .collect()
                }
                GenerationMode::GoldPlan(k) => {
                    let docs = sorted(self.load_split("dev", Split::Dev)?);
                    if docs.is_empty() {
                        return Err(PipelineError::Config("gold-plan mode needs a nonempty dev split".into()));
                    }
                    docs.par_iter()
                        .enumerate()
                        .map(|(i, d)| {
                            let cond = condition_of(d)?;
                            let trace = gold_plan_generate(&chain, &vocab, &d.tokens, &cond, k, dec, &mut rng(i))?;
                            Ok((Some(d.id.clone()), trace))
                        })
                        .collect()
                }
            };
            let results = results.into_iter().collect::<Result<Vec<_>>>()?;

            self.ensure_dir("generated")?;
            let mut docs = Vec::with_capacity(results.len());
            let mut traces = String::new();
            let mut empty = 0;
            for (i, (source_id, trace)) in results.into_iter().enumerate() {
                let id = format!("gen-{i:05}");
                let output = trace.output();
                empty += usize::from(output.is_empty());
                docs.push(Document::new(id.clone(), output).with_condition(trace.condition.clone()));
                let rec = TraceRecord {
                    id,
                    source_id,
                    mode: mode.to_string(),
                    condition: trace.condition,
                    stage_outputs: trace.stage_outputs,
                };
                traces.push_str(&serde_json::to_string(&rec).expect("trace serializes"));
                traces.push('\n');
            }
            let gen_rel = Self::generated_file(mode);
            let gen_path = self.path(&gen_rel);
            write_corpus(&gen_path, &docs).map_err(io_err(&gen_path))?;
            let trace_rel = format!("generated/{}.traces.jsonl", mode.tag());
            let trace_path = self.path(&trace_rel);
            fs::write(&trace_path, traces).map_err(io_err(&trace_path))?;
            let mut notes = vec![format!("{} samples", docs.len())];
            if empty > 0 {
                notes.push(format!("{empty} empty outputs"));
            }
            Ok(StepOutput {
                outputs: vec![gen_rel, trace_rel],
                notes,
                ..Default::default()
            })
        })
    }

    /// Scores a generated corpus against a reference corpus and writes
    /// `reports/<generated stem>.{json,txt}`.
    pub fn evaluate(&self, generated: &Path, reference: &Path) -> Result<(MetricReport, PathBuf)> {
        for p in [generated, reference] {
            if !p.is_file() {
                return Err(PipelineError::MissingFile(p.to_path_buf()));
            }
        }
        let stem = generated
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("generated")
            .to_string();
        let inputs = BTreeMap::from([
            ("generated".to_string(), file_digest(generated)?),
            ("reference".to_string(), file_digest(reference)?),
        ]);
        let mut metrics = self.cfg.metrics.clone();
        for e in &mut metrics.embeddings {
            e.generated = self.cfg.resolve(&e.generated);
            e.reference = self.cfg.resolve(&e.reference);
        }
        let json_rel = format!("reports/{stem}.json");
        let mut report = None;
        self.step(
            &format!("evaluate:{stem}"),
            json!({ "tokenizer": self.cfg.tokenizer, "metrics": metrics }),
            inputs,
            false,
            || {
                let tok = &self.cfg.tokenizer;
                let gen = load_corpus(generated, tok, Split::Test)?.0;
                let reference = load_corpus(reference, tok, Split::Test)?.0;
                let r = evaluate(&gen, &reference, &metrics)?;
                for w in &r.meta.warnings {
                    log::warn!("{w}");
                }
                self.ensure_dir("reports")?;
                let txt_rel = format!("reports/{stem}.txt");
                for (rel, text) in [(&json_rel, r.to_json()), (&txt_rel, r.summary())] {
                    let p = self.path(rel);
                    fs::write(&p, text).map_err(io_err(&p))?;
                }
                report = Some(r);
                Ok(StepOutput {
                    outputs: vec![json_rel.clone(), txt_rel],
                    ..Default::default()
                })
            },
        )?;
        Ok((report.expect("evaluate body ran"), self.path(&json_rel)))
    }

    /// build-vocab → extract → train → generate → evaluate, reusing cached
    /// steps.
    pub fn run(&self) -> Result<RunSummary> {
        self.cfg.validate()?;
        let mode = self.cfg.generation.mode;
        let wrap = |step: &str| {
            let manifest = self.path(MANIFEST_FILE);
            let step = step.to_string();
            move |e: PipelineError| PipelineError::Step {
                step,
                manifest,
                source: Box::new(e),
            }
        };
        let mut steps = Vec::new();
        steps.push(("build-vocab".to_string(), self.build_vocab(true).map_err(wrap("build-vocab"))?));
        steps.push(("extract".to_string(), self.extract(true).map_err(wrap("extract"))?));
        steps.push(("train".to_string(), self.train(true).map_err(wrap("train"))?));
        let gen_name = format!("generate:{}", mode.tag());
        steps.push((gen_name.clone(), self.generate(mode, true).map_err(wrap(&gen_name))?));
        let eval_name = format!("evaluate:{}", mode.tag());
        let (report, report_path) = self
            .evaluate(&self.path(&Self::generated_file(mode)), &self.path(&data_file("test")))
            .map_err(wrap(&eval_name))?;
        let manifest = RunManifest::load_or_new(&self.out, &self.config_sha256)?;
        if let Some(rec) = manifest.steps.get(&eval_name) {
            steps.push((eval_name, rec.clone()));
        }
        Ok(RunSummary {
            steps,
            report,
            report_path,
        })
    }

    /// Path of the reference (test) split written by build-vocab.
    pub fn test_file(&self) -> PathBuf {
        self.path(&data_file("test"))
    }
}

pub fn cmd_build_vocab(cfg: &RunConfig) -> Result<StepRecord> {
    Pipeline::new(cfg.clone())?.build_vocab(false)
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<StepRecord> {
    Pipeline::new(cfg.clone())?.extract(false)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<StepRecord> {
    Pipeline::new(cfg.clone())?.train(false)
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<StepRecord> {
    Pipeline::new(cfg.clone())?.generate(cfg.generation.mode, false)
}

pub fn cmd_evaluate(cfg: &RunConfig, generated: &Path, reference: &Path) -> Result<(MetricReport, PathBuf)> {
    Pipeline::new(cfg.clone())?.evaluate(generated, reference)
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    Pipeline::new(cfg.clone())?.run()
}
