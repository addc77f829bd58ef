//! Stage-1 planner: an interpolated n-gram model of
//! `[BOS.. condition SEP target EOS]` that predicts only target tokens.

use rand::RngCore;

use super::alphabet::{Alphabet, BOS, EOS, SEP};
use super::backoff::{BackoffBuilder, BackoffModel, Smoothing};
use super::sampling::DecoderConfig;
use super::{ModelError, Result, StageGenerator};
use crate::staging::TrainingPair;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerModel {
    pub(crate) order: usize,
    pub(crate) alphabet: Alphabet,
    pub(crate) model: BackoffModel,
}

impl PlannerModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn smoothing(&self) -> &Smoothing {
        &self.model.smoothing
    }

    /// Tokens the planner can emit (excluding the stop symbol).
    pub fn output_tokens(&self) -> Vec<&str> {
        let eos = self.alphabet.id(EOS);
        self.model
            .outputs()
            .iter()
            .filter(|&&s| Some(s) != eos)
            .map(|&s| self.alphabet.symbol(s))
            .collect()
    }

    fn prefix(&self, condition: &[String]) -> Vec<u32> {
        let bos = self.alphabet.id_or_unk(BOS);
        let mut h = vec![bos; self.order - 1];
        h.extend(condition.iter().map(|t| self.alphabet.id_or_unk(t)));
        h.push(self.alphabet.id_or_unk(SEP));
        h
    }

    /// Context keys, longest first.
    fn keys<'a>(&self, history: &'a [u32]) -> Vec<&'a [u32]> {
        (1..self.order)
            .rev()
            .map(|h| &history[history.len() - h..])
            .collect()
    }

    /// Smoothed next-token distribution after `condition SEP emitted`.
    pub fn next_distribution(&self, condition: &[String], emitted: &[String]) -> Vec<(String, f64)> {
        let mut history = self.prefix(condition);
        history.extend(emitted.iter().map(|t| self.alphabet.id_or_unk(t)));
        self.model
            .distribution(&self.keys(&history))
            .into_iter()
            .map(|(s, p)| (self.alphabet.symbol(s).to_string(), p))
            .collect()
    }

    /// Log-probability of `target` followed by the stop symbol.
    pub fn log_likelihood(&self, condition: &[String], target: &[String]) -> Result<f64> {
        let mut history = self.prefix(condition);
        let eos = self.alphabet.id_or_unk(EOS);
        let mut total = 0.0;
        let symbols = target
            .iter()
            .map(|t| match self.alphabet.id(t) {
                Some(s) if self.model.is_output(s) => Ok(s),
                _ => Err(ModelError::UnknownSymbol(t.clone())),
            })
            .chain(std::iter::once(Ok(eos)));
        for s in symbols {
            let s = s?;
            total += self.model.prob(&self.keys(&history), s).ln();
            history.push(s);
        }
        Ok(total)
    }

    pub fn generate(
        &self,
        condition: &[String],
        cfg: &DecoderConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<String>> {
        cfg.validate()?;
        let mut history = self.prefix(condition);
        let eos = self.alphabet.id_or_unk(EOS);
        let mut out = Vec::new();
        while out.len() < cfg.max_tokens {
            let s = self.model.sample(&self.keys(&history), cfg, rng)?;
            if s == eos {
                break;
            }
            out.push(self.alphabet.symbol(s).to_string());
            history.push(s);
        }
        Ok(out)
    }
}

pub fn train_planner(pairs: &[TrainingPair], order: usize, smoothing: Smoothing) -> Result<PlannerModel> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    if order < 1 {
        return Err(ModelError::InvalidConfig("planner order must be >= 1".into()));
    }
    smoothing.validate(order - 1)?;

    let alphabet = Alphabet::new(
        [BOS, EOS, SEP]
            .into_iter()
            .map(String::from)
            .chain(pairs.iter().flat_map(|p| p.input.iter().chain(&p.target).cloned())),
    );
    let eos = alphabet.id_or_unk(EOS);
    let bos = alphabet.id_or_unk(BOS);
    let sep = alphabet.id_or_unk(SEP);

    let mut builder = BackoffBuilder::default();
    for p in pairs {
        let mut seq = vec![bos; order - 1];
        seq.extend(p.input.iter().map(|t| alphabet.id_or_unk(t)));
        seq.push(sep);
        let start = seq.len();
        seq.extend(p.target.iter().map(|t| alphabet.id_or_unk(t)));
        seq.push(eos);
        for t in start..seq.len() {
            let history = &seq[..t];
            let keys: Vec<&[u32]> = (1..order).rev().map(|h| &history[t - h..]).collect();
            builder.observe(&keys, seq[t]);
        }
    }
    Ok(PlannerModel {
        order,
        alphabet,
        model: builder.finish(smoothing)?,
    })
}

impl StageGenerator for PlannerModel {
    fn stage(&self) -> usize {
        1
    }

    fn generate_stage(
        &self,
        input: &[String],
        cfg: &DecoderConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<String>> {
        self.generate(input, cfg, rng)
    }
}
