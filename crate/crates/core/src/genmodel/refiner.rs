//! Refinement stages: an anchored insertion model.
//!
//! The refiner copies the previous stage's tokens (anchors) in order and
//! decides before each output position whether to emit the next anchor or
//! insert a new token. Decisions are conditioned on the next pending anchor
//! (or END) and the last `m` output tokens.

use rand::RngCore;

use super::alphabet::{Alphabet, BOS, EMIT, END};
use super::backoff::{BackoffBuilder, BackoffModel, Smoothing};
use super::sampling::DecoderConfig;
use super::{ModelError, Result, StageGenerator};
use crate::staging::{align, TrainingPair};

#[derive(Debug, Clone, PartialEq)]
pub struct RefinerModel {
    pub(crate) stage: usize,
    pub(crate) order: usize,
    pub(crate) alphabet: Alphabet,
    pub(crate) model: BackoffModel,
}

/// A refiner decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    EmitAnchor,
    Insert(String),
}

/// Replays a training pair as (anchor, action) steps. The anchor is `None`
/// once every matched input token has been emitted; the final step is the
/// stop decision.
pub fn observed_actions(input: &[String], target: &[String]) -> Vec<(Option<String>, Action)> {
    let alignment = align(input, target);
    let mut steps = Vec::with_capacity(target.len() + 1);
    let mut next = 0;
    for (j, tok) in target.iter().enumerate() {
        let pending = alignment.pairs.get(next);
        let anchor = pending.map(|&(i, _)| input[i].clone());
        match pending {
            Some(&(_, tj)) if tj == j => {
                steps.push((anchor, Action::EmitAnchor));
                next += 1;
            }
            _ => steps.push((anchor, Action::Insert(tok.clone()))),
        }
    }
    steps.push((None, Action::EmitAnchor));
    steps
}

impl RefinerModel {
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn smoothing(&self) -> &Smoothing {
        &self.model.smoothing
    }

    /// Tokens the refiner may insert.
    pub fn insert_tokens(&self) -> Vec<&str> {
        let emit = self.alphabet.id(EMIT);
        self.model
            .outputs()
            .iter()
            .filter(|&&s| Some(s) != emit)
            .map(|&s| self.alphabet.symbol(s))
            .collect()
    }

    fn start(&self) -> Vec<u32> {
        vec![self.alphabet.id_or_unk(BOS); self.order]
    }

    /// Keys `[o_{-h}.., o_{-1}, anchor]` for `h = m..0`, read off the end of
    /// `buf` (history with the anchor appended).
    fn keys<'a>(&self, buf: &'a [u32]) -> Vec<&'a [u32]> {
        (0..=self.order).rev().map(|h| &buf[buf.len() - 1 - h..]).collect()
    }

    fn anchor_id(&self, anchor: Option<&str>) -> u32 {
        match anchor {
            Some(t) => self.alphabet.id_or_unk(t),
            None => self.alphabet.id_or_unk(END),
        }
    }

    fn action_id(&self, action: &Action) -> Result<u32> {
        let id = match action {
            Action::EmitAnchor => self.alphabet.id(EMIT),
            Action::Insert(t) => self.alphabet.id(t),
        };
        match id {
            Some(s) if self.model.is_output(s) => Ok(s),
            _ => Err(ModelError::UnknownSymbol(match action {
                Action::EmitAnchor => EMIT.to_string(),
                Action::Insert(t) => t.clone(),
            })),
        }
    }

    /// Smoothed action distribution given the emitted output so far and the
    /// next pending anchor (`None` for END).
    pub fn action_distribution(&self, output: &[String], anchor: Option<&str>) -> Vec<(Action, f64)> {
        let mut buf = self.start();
        buf.extend(output.iter().map(|t| self.alphabet.id_or_unk(t)));
        buf.push(self.anchor_id(anchor));
        let emit = self.alphabet.id_or_unk(EMIT);
        self.model
            .distribution(&self.keys(&buf))
            .into_iter()
            .map(|(s, p)| {
                let a = if s == emit {
                    Action::EmitAnchor
                } else {
                    Action::Insert(self.alphabet.symbol(s).to_string())
                };
                (a, p)
            })
            .collect()
    }

    /// Log-probability of refining `input` into `target`, stop included.
    pub fn log_likelihood(&self, input: &[String], target: &[String]) -> Result<f64> {
        let mut history = self.start();
        let mut total = 0.0;
        let steps = observed_actions(input, target);
        for (j, (anchor, action)) in steps.iter().enumerate() {
            let s = self.action_id(action)?;
            history.push(self.anchor_id(anchor.as_deref()));
            total += self.model.prob(&self.keys(&history), s).ln();
            history.pop();
            if let Some(tok) = target.get(j) {
                history.push(self.alphabet.id_or_unk(tok));
            }
        }
        Ok(total)
    }

    pub fn generate(
        &self,
        anchors: &[String],
        cfg: &DecoderConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<String>> {
        cfg.validate()?;
        let emit = self.alphabet.id_or_unk(EMIT);
        let mut history = self.start();
        let mut out: Vec<String> = Vec::new();
        let mut next = 0;
        loop {
            let pending = anchors.len() - next;
            let remaining = cfg.max_tokens.saturating_sub(out.len());
            if pending > 0 && remaining <= pending {
                out.extend_from_slice(&anchors[next..]);
                break;
            }
            if remaining == 0 {
                break;
            }
            let anchor = anchors.get(next).map(String::as_str);
            history.push(self.anchor_id(anchor));
            let s = self.model.sample(&self.keys(&history), cfg, rng)?;
            history.pop();
            let tok = if s == emit {
                match anchor {
                    Some(a) => {
                        next += 1;
                        a.to_string()
                    }
                    None => break,
                }
            } else {
                self.alphabet.symbol(s).to_string()
            };
            history.push(self.alphabet.id_or_unk(&tok));
            out.push(tok);
        }
        Ok(out)
    }
}

pub fn train_refiner(
    pairs: &[TrainingPair],
    stage: usize,
    order: usize,
    smoothing: Smoothing,
) -> Result<RefinerModel> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    if stage < 2 {
        return Err(ModelError::InvalidConfig("refiner stages start at 2".into()));
    }
    smoothing.validate(order + 1)?;

    let alphabet = Alphabet::new(
        [BOS, EMIT, END]
            .into_iter()
            .map(String::from)
            .chain(pairs.iter().flat_map(|p| p.input.iter().chain(&p.target).cloned())),
    );
    let emit = alphabet.id_or_unk(EMIT);
    let end = alphabet.id_or_unk(END);
    let bos = alphabet.id_or_unk(BOS);

    let mut builder = BackoffBuilder::default();
    for p in pairs {
        let mut history = vec![bos; order];
        for (j, (anchor, action)) in observed_actions(&p.input, &p.target).into_iter().enumerate() {
            history.push(anchor.map_or(end, |a| alphabet.id_or_unk(&a)));
            let keys: Vec<&[u32]> = (0..=order).rev().map(|h| &history[history.len() - 1 - h..]).collect();
            let symbol = match action {
                Action::EmitAnchor => emit,
                Action::Insert(t) => alphabet.id_or_unk(&t),
            };
            builder.observe(&keys, symbol);
            history.pop();
            if let Some(tok) = p.target.get(j) {
                history.push(alphabet.id_or_unk(tok));
            }
        }
    }
    Ok(RefinerModel {
        stage,
        order,
        alphabet,
        model: builder.finish(smoothing)?,
    })
}

impl StageGenerator for RefinerModel {
    fn stage(&self) -> usize {
        self.stage
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
