//! Count-based stage generators and the staged generation chain.
//!
//! Stage 1 is a planner over `V_1`; every later stage is a refiner that
//! keeps the previous stage's tokens as anchors and inserts tokens from its
//! own vocabulary around them.

mod alphabet;
mod backoff;
mod io;
mod planner;
mod refiner;
pub mod sampling;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::importance::StageVocabulary;
use crate::staging::extract_tokens;

pub use alphabet::{Alphabet, BOS, EMIT, END, EOS, SEP};
pub use backoff::Smoothing;
pub use io::{
    load_model, load_planner, load_refiner, save_planner, save_refiner, AnyModel, ModelKind,
    MODEL_VERSION,
};
pub use planner::{train_planner, PlannerModel};
pub use refiner::{observed_actions, train_refiner, Action, RefinerModel};
pub use sampling::{nucleus, sample_next, DecoderConfig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no training pairs")]
    EmptyTraining,
    #[error("symbol not in model alphabet: {0:?}")]
    UnknownSymbol(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("model format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("expected a {expected} model, found a {found} model")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("stage mismatch: {0}")]
    StageMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// One link of the generation chain.
pub trait StageGenerator: Send + Sync {
    fn stage(&self) -> usize;

    /// Decodes this stage's sequence from the previous stage's output (or
    /// the condition, for stage 1).
    fn generate_stage(
        &self,
        input: &[String],
        cfg: &DecoderConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<String>>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub condition: Vec<String>,
    /// `c_1 .. c_{K-1}, y`.
    pub stage_outputs: Vec<Vec<String>>,
}

impl GenerationTrace {
    /// Final stage output with sentinel symbols removed.
    pub fn output(&self) -> Vec<String> {
        let sentinels = [BOS, EOS, SEP, EMIT, END];
        self.stage_outputs
            .last()
            .map(|y| y.iter().filter(|t| !sentinels.contains(&t.as_str())).cloned().collect())
            .unwrap_or_default()
    }
}

/// Training hyperparameters for all stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub planner_order: usize,
    pub refiner_order: usize,
    /// Add-lambda mass on the output-alphabet floor.
    pub lambda: f64,
    /// Weight of each context level before backing off.
    pub interpolation: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            planner_order: 4,
            refiner_order: 3,
            lambda: 0.1,
            interpolation: 0.8,
        }
    }
}

impl GeneratorConfig {
    pub fn planner_smoothing(&self) -> Smoothing {
        Smoothing::uniform(self.planner_order.saturating_sub(1), self.interpolation, self.lambda)
    }

    pub fn refiner_smoothing(&self) -> Smoothing {
        Smoothing::uniform(self.refiner_order + 1, self.interpolation, self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if self.planner_order < 1 {
            return Err(ModelError::InvalidConfig("planner_order must be >= 1".into()));
        }
        self.planner_smoothing().validate(self.planner_order - 1)?;
        self.refiner_smoothing().validate(self.refiner_order + 1)
    }
}

fn check_chain(stages: &[&dyn StageGenerator], vocabs: &StageVocabulary) -> Result<()> {
    if stages.len() != vocabs.num_stages() {
        return Err(ModelError::StageMismatch(format!(
            "{} models for {} vocabularies",
            stages.len(),
            vocabs.num_stages()
        )));
    }
    for (i, s) in stages.iter().enumerate() {
        if s.stage() != i + 1 {
            return Err(ModelError::StageMismatch(format!(
                "model at position {} reports stage {}",
                i + 1,
                s.stage()
            )));
        }
    }
    Ok(())
}

fn run_from(
    stages: &[&dyn StageGenerator],
    first: usize,
    mut outputs: Vec<Vec<String>>,
    condition: &[String],
    cfg: &DecoderConfig,
    rng: &mut dyn RngCore,
) -> Result<GenerationTrace> {
    for stage in &stages[first..] {
        let input = outputs.last().map_or(condition, Vec::as_slice);
        let out = stage.generate_stage(input, cfg, rng)?;
        outputs.push(out);
    }
    Ok(GenerationTrace {
        condition: condition.to_vec(),
        stage_outputs: outputs,
    })
}

/// Runs the full chain: planner on the condition, then each refiner on the
/// previous stage's output.
pub fn generate(
    stages: &[&dyn StageGenerator],
    vocabs: &StageVocabulary,
    condition: &[String],
    cfg: &DecoderConfig,
    rng: &mut dyn RngCore,
) -> Result<GenerationTrace> {
    cfg.validate()?;
    check_chain(stages, vocabs)?;
    run_from(stages, 0, Vec::new(), condition, cfg, rng)
}

/// Replaces stages `1..start_stage` with gold extractions of `document` and
/// generates the rest.
pub fn gold_plan_generate(
    stages: &[&dyn StageGenerator],
    vocabs: &StageVocabulary,
    document: &[String],
    condition: &[String],
    start_stage: usize,
    cfg: &DecoderConfig,
    rng: &mut dyn RngCore,
) -> Result<GenerationTrace> {
    cfg.validate()?;
    check_chain(stages, vocabs)?;
    if start_stage < 2 || start_stage > stages.len() {
        return Err(ModelError::StageMismatch(format!(
            "gold-plan start stage {start_stage} outside 2..={}",
            stages.len()
        )));
    }
    let gold = (1..start_stage)
        .map(|k| extract_tokens(document, vocabs.stage(k)))
        .collect();
    run_from(stages, start_stage - 1, gold, condition, cfg, rng)
}
