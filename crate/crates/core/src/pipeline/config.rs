use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::corpus::TokenizerConfig;
use crate::genmodel::{DecoderConfig, GeneratorConfig};
use crate::importance::StagePlan;
use crate::metrics::MetricConfig;
use crate::staging::NoiseConfig;

/// Generation mode: sample the whole chain, or start from gold skeletons
/// extracted from the dev split up to stage `k - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GenerationMode {
    Full,
    GoldPlan(usize),
}

impl GenerationMode {
    /// File stem used for this mode's outputs.
    pub fn tag(&self) -> String {
        match self {
            GenerationMode::Full => "full".into(),
            GenerationMode::GoldPlan(k) => format!("gold-plan-{k}"),
        }
    }
}

impl fmt::Display for GenerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenerationMode::Full => f.write_str("full"),
            GenerationMode::GoldPlan(k) => write!(f, "gold-plan:{k}"),
        }
    }
}

impl FromStr for GenerationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "full" {
            return Ok(GenerationMode::Full);
        }
        s.strip_prefix("gold-plan:")
            .and_then(|k| k.parse().ok())
            .map(GenerationMode::GoldPlan)
            .ok_or_else(|| format!("unknown mode {s:?}, expected full or gold-plan:<k>"))
    }
}

impl TryFrom<String> for GenerationMode {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<GenerationMode> for String {
    fn from(m: GenerationMode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub train: PathBuf,
    /// Separate dev/test files; when absent, `train` is split by `split`.
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Train / dev / test fractions.
    pub split: [f64; 3],
    pub split_seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            train: PathBuf::from("corpus.jsonl"),
            dev: None,
            test: None,
            split: [0.8, 0.1, 0.1],
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub samples: usize,
    pub mode: GenerationMode,
    /// Condition every sample on a prompt taken from the test split.
    pub conditional: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            mode: GenerationMode::Full,
            conditional: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// `progen-K`; picks the coverage schedule when `stages` is unset.
    pub preset: String,
    pub corpus: CorpusConfig,
    pub tokenizer: TokenizerConfig,
    pub stages: Option<StagePlan>,
    pub noise: NoiseConfig,
    pub generator: GeneratorConfig,
    pub decoder: DecoderConfig,
    pub metrics: MetricConfig,
    pub generation: GenerationConfig,
    pub output_dir: PathBuf,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: "progen-2".into(),
            corpus: CorpusConfig::default(),
            tokenizer: TokenizerConfig::default(),
            stages: None,
            noise: NoiseConfig::default(),
            generator: GeneratorConfig::default(),
            decoder: DecoderConfig::default(),
            metrics: MetricConfig::default(),
            generation: GenerationConfig::default(),
            output_dir: PathBuf::from("out"),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub stages: Option<usize>,
    pub samples: Option<usize>,
    pub mode: Option<GenerationMode>,
}

fn preset_stages(name: &str) -> Option<usize> {
    name.strip_prefix("progen-")?.parse().ok()
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        let cfg = Self {
            preset: name.to_string(),
            ..Self::default()
        };
        cfg.stage_plan()?;
        Ok(cfg)
    }

    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            // command-line paths are relative to the working directory
            self.output_dir = std::env::current_dir().map(|d| d.join(out)).unwrap_or_else(|_| out.clone());
        }
        if let Some(seed) = o.seed {
            self.noise.seed = seed;
            self.decoder.seed = seed;
        }
        if let Some(k) = o.stages {
            self.preset = format!("progen-{k}");
            self.stages = None;
        }
        if let Some(n) = o.samples {
            self.generation.samples = n;
        }
        if let Some(m) = o.mode {
            self.generation.mode = m;
        }
    }

    pub fn stage_plan(&self) -> Result<StagePlan> {
        match &self.stages {
            Some(plan) => {
                plan.validate()?;
                Ok(plan.clone())
            }
            None => {
                let k = preset_stages(&self.preset)
                    .ok_or_else(|| PipelineError::Config(format!("unknown preset {:?}", self.preset)))?;
                Ok(StagePlan::preset(k)?)
            }
        }
    }

    pub fn num_stages(&self) -> Result<usize> {
        Ok(self.stage_plan()?.stages())
    }

    /// Checks values and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        self.validate_values()?;
        self.check_inputs()
    }

    pub fn check_inputs(&self) -> Result<()> {
        let c = &self.corpus;
        for p in std::iter::once(&c.train).chain(c.dev.iter()).chain(c.test.iter()) {
            let p = self.resolve(p);
            if !p.is_file() {
                return Err(PipelineError::MissingFile(p));
            }
        }
        Ok(())
    }

    pub fn validate_values(&self) -> Result<()> {
        let k = self.num_stages()?;
        self.tokenizer.validate()?;
        self.noise.validate()?;
        self.generator.validate()?;
        self.decoder.validate()?;
        if self.generation.samples == 0 {
            return Err(PipelineError::Config("samples must be >= 1".into()));
        }
        if self.metrics.orders.iter().any(|&n| n == 0) {
            return Err(PipelineError::Config("metric orders must be >= 1".into()));
        }
        if self.corpus.dev.is_some() != self.corpus.test.is_some() {
            return Err(PipelineError::Config("give both corpus.dev and corpus.test, or neither".into()));
        }
        self.check_mode(self.generation.mode, k)
    }

    pub fn check_mode(&self, mode: GenerationMode, stages: usize) -> Result<()> {
        match mode {
            GenerationMode::GoldPlan(s) if s < 2 || s > stages => Err(PipelineError::Config(format!(
                "gold-plan:{s} needs 2 <= k <= {stages}"
            ))),
            _ => Ok(()),
        }
    }
}
