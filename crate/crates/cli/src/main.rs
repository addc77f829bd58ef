use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use progen_core::corpus::write_corpus;
use progen_core::pipeline::{
    cmd_build_vocab, cmd_evaluate, cmd_extract, cmd_generate, cmd_run, cmd_train, GenerationMode, Overrides,
    Pipeline, PipelineError, RunConfig, StepRecord,
};
use progen_core::synthetic::{synthesize, SynthConfig};

#[derive(Parser)]
#[command(name = "progen", version, about = "Progressive coarse-to-fine text generation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the corpus and build stage vocabularies.
    BuildVocab(Common),
    /// Extract clean and noised per-stage training pairs.
    Extract(Common),
    /// Train the planner and refiners.
    Train(Common),
    /// Sample documents through the stage chain.
    Generate(Common),
    /// Score a generated corpus against a reference corpus.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Generated corpus (defaults to the output of the configured mode).
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Reference corpus (defaults to the test split).
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Run every step, reusing cached artifacts.
    Run(Common),
    /// Write a synthetic topic-structured corpus as JSON lines.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        documents: usize,
        #[arg(long, default_value_t = 2000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 20)]
        topics: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Give every document a short topic prompt.
        #[arg(long)]
        prompts: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Run config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for noising and decoding.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of stages K (selects the progen-K preset).
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// full or gold-plan:<k>.
    #[arg(long)]
    mode: Option<GenerationMode>,
}

impl Common {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            out: self.out.clone(),
            seed: self.seed,
            stages: self.stages,
            samples: self.samples,
            mode: self.mode,
        });
        Ok(cfg)
    }
}

fn step_json(name: &str, rec: &StepRecord) -> Value {
    json!({ "step": name, "cached": rec.cached, "outputs": rec.outputs, "notes": rec.notes })
}

fn execute(command: Command) -> Result<Value, PipelineError> {
    match command {
        Command::BuildVocab(c) => Ok(step_json("build-vocab", &cmd_build_vocab(&c.config()?)?)),
        Command::Extract(c) => Ok(step_json("extract", &cmd_extract(&c.config()?)?)),
        Command::Train(c) => Ok(step_json("train", &cmd_train(&c.config()?)?)),
        Command::Generate(c) => {
            let cfg = c.config()?;
            Ok(step_json(&format!("generate:{}", cfg.generation.mode.tag()), &cmd_generate(&cfg)?))
        }
        Command::Evaluate {
            common,
            generated,
            reference,
        } => {
            let cfg = common.config()?;
            let out = cfg.out_dir();
            let generated =
                generated.unwrap_or_else(|| out.join(Pipeline::generated_file(cfg.generation.mode)));
            let reference = reference.unwrap_or_else(|| out.join("data/test.jsonl"));
            let (report, path) = cmd_evaluate(&cfg, &generated, &reference)?;
            print!("{}", report.summary());
            Ok(json!({ "step": "evaluate", "report": path }))
        }
        Command::Run(c) => {
            let summary = cmd_run(&c.config()?)?;
            print!("{}", summary.report.summary());
            let steps: Vec<Value> = summary.steps.iter().map(|(n, r)| step_json(n, r)).collect();
            Ok(json!({ "steps": steps, "report": summary.report_path }))
        }
        Command::Synth {
            out,
            documents,
            vocab_size,
            topics,
            seed,
            prompts,
        } => {
            let defaults = SynthConfig::default();
            if topics == 0 || vocab_size <= defaults.function_words + topics * defaults.words_per_topic {
                return Err(PipelineError::Config(format!(
                    "vocab-size must exceed {} for {topics} topics",
                    defaults.function_words + topics * defaults.words_per_topic
                )));
            }
            let docs = synthesize(&SynthConfig {
                documents,
                vocab_size,
                topics,
                prompts,
                seed,
                ..defaults
            });
            write_corpus(&out, &docs).map_err(|source| PipelineError::Io {
                path: out.clone(),
                source,
            })?;
            Ok(json!({ "step": "synth", "documents": docs.len(), "path": out }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
