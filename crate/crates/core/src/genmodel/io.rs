//! Model files.
//!
//! A model file is UTF-8 text, one record per line:
//!
//! ```text
//! progen-model 1
//! kind <planner|refiner>
//! stage <k>
//! order <m>
//! vocab-sha256 <hex digest of the symbol table>
//! smoothing lambda=<f64> weights=<f64>,<f64>,...
//! symbols <n>
//! <escaped symbol>                       n lines, id = line index
//! outputs <n>
//! <symbol id>\t<count>                   n lines, ascending id
//! contexts <n>
//! <id>,<id>,...\t<id>:<count> <id>:<count> ...   n lines, ascending key
//! end
//! ```
//!
//! Planner context keys are the last `h` history symbols; refiner keys are
//! the last `h` output symbols followed by the pending anchor. Symbols are
//! escaped with `\\`, `\n`, `\t`, `\r`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::alphabet::Alphabet;
use super::backoff::{BackoffModel, Continuations, Smoothing};
use super::{ModelError, PlannerModel, RefinerModel, Result};
use crate::corpus::{escape_token, unescape_token};

pub const MODEL_MAGIC: &str = "progen-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Planner,
    Refiner,
}

impl ModelKind {
    fn as_str(self) -> &'static str {
        match self {
            ModelKind::Planner => "planner",
            ModelKind::Refiner => "refiner",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Planner(PlannerModel),
    Refiner(RefinerModel),
}

fn encode(kind: ModelKind, stage: usize, order: usize, alphabet: &Alphabet, model: &BackoffModel) -> String {
    let mut s = String::new();
    let sm = &model.smoothing;
    let weights: Vec<String> = sm.weights.iter().map(|w| w.to_string()).collect();
    let _ = writeln!(s, "{MODEL_MAGIC} {MODEL_VERSION}");
    let _ = writeln!(s, "kind {}", kind.as_str());
    let _ = writeln!(s, "stage {stage}");
    let _ = writeln!(s, "order {order}");
    let _ = writeln!(s, "vocab-sha256 {}", alphabet.digest());
    let _ = writeln!(s, "smoothing lambda={} weights={}", sm.lambda, weights.join(","));
    let _ = writeln!(s, "symbols {}", alphabet.len());
    for sym in alphabet.symbols() {
        let _ = writeln!(s, "{}", escape_token(sym));
    }
    let outputs: Vec<(u32, u64)> = model.floor_counts().collect();
    let _ = writeln!(s, "outputs {}", outputs.len());
    for (id, c) in outputs {
        let _ = writeln!(s, "{id}\t{c}");
    }
    let contexts = model.sorted_contexts();
    let _ = writeln!(s, "contexts {}", contexts.len());
    for (key, cont) in contexts {
        let key: Vec<String> = key.iter().map(u32::to_string).collect();
        let next: Vec<String> = cont.next.iter().map(|(s, c)| format!("{s}:{c}")).collect();
        let _ = writeln!(s, "{}\t{}", key.join(","), next.join(" "));
    }
    s.push_str("end\n");
    s
}

pub fn save_planner(model: &PlannerModel, path: &Path) -> Result<()> {
    let text = encode(ModelKind::Planner, 1, model.order, &model.alphabet, &model.model);
    fs::write(path, text)?;
    Ok(())
}

pub fn save_refiner(model: &RefinerModel, path: &Path) -> Result<()> {
    let text = encode(ModelKind::Refiner, model.stage, model.order, &model.alphabet, &model.model);
    fs::write(path, text)?;
    Ok(())
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line += 1;
        self.inner
            .next()
            .ok_or_else(|| ModelError::Corrupt(format!("unexpected end of file at line {}", self.line)))
    }

    fn corrupt(&self, what: &str) -> ModelError {
        ModelError::Corrupt(format!("line {}: {what}", self.line))
    }

    fn field(&mut self, name: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.corrupt(&format!("expected `{name}`")))
    }

    fn number<T: std::str::FromStr>(&mut self, name: &str) -> Result<T> {
        let v = self.field(name)?;
        v.parse().map_err(|_| self.corrupt(&format!("bad `{name}` value")))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, lines: &Lines) -> Result<T> {
    s.parse().map_err(|_| lines.corrupt("bad number"))
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    let text = fs::read_to_string(path)?;
    decode(&text)
}

fn decode(text: &str) -> Result<AnyModel> {
    let mut lines = Lines {
        inner: text.lines(),
        line: 0,
    };
    let header = lines.next()?;
    let version = header
        .strip_prefix(MODEL_MAGIC)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| lines.corrupt("not a model file"))?;
    let version: u32 = parse_num(version, &lines)?;
    if version != MODEL_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let kind = match lines.field("kind")? {
        "planner" => ModelKind::Planner,
        "refiner" => ModelKind::Refiner,
        _ => return Err(lines.corrupt("unknown model kind")),
    };
    let stage: usize = lines.number("stage")?;
    let order: usize = lines.number("order")?;
    let digest = lines.field("vocab-sha256")?.to_string();

    let smoothing_line = lines.field("smoothing")?;
    let (lambda, weights) = smoothing_line
        .strip_prefix("lambda=")
        .and_then(|r| r.split_once(" weights="))
        .ok_or_else(|| lines.corrupt("bad smoothing record"))?;
    let lambda: f64 = parse_num(lambda, &lines)?;
    let weights = if weights.is_empty() {
        Vec::new()
    } else {
        weights
            .split(',')
            .map(|w| parse_num(w, &lines))
            .collect::<Result<Vec<f64>>>()?
    };
    let smoothing = Smoothing { lambda, weights };

    let n_symbols: usize = lines.number("symbols")?;
    let mut symbols = Vec::with_capacity(n_symbols);
    for _ in 0..n_symbols {
        let raw = lines.next()?;
        symbols.push(unescape_token(raw).ok_or_else(|| lines.corrupt("bad symbol escape"))?);
    }
    if symbols.windows(2).any(|w| w[0] >= w[1]) {
        return Err(lines.corrupt("symbols not sorted"));
    }
    let alphabet = Alphabet::from_sorted(symbols);
    if alphabet.digest() != digest {
        return Err(ModelError::Corrupt("vocabulary digest mismatch".into()));
    }
    let in_range = |id: u32, lines: &Lines| {
        if (id as usize) < n_symbols {
            Ok(id)
        } else {
            Err(lines.corrupt("symbol id out of range"))
        }
    };

    let n_outputs: usize = lines.number("outputs")?;
    let mut floor = Vec::with_capacity(n_outputs);
    for _ in 0..n_outputs {
        let line = lines.next()?;
        let (id, count) = line
            .split_once('\t')
            .ok_or_else(|| lines.corrupt("bad output record"))?;
        floor.push((in_range(parse_num(id, &lines)?, &lines)?, parse_num(count, &lines)?));
    }

    let n_contexts: usize = lines.number("contexts")?;
    let mut contexts = HashMap::with_capacity(n_contexts);
    for _ in 0..n_contexts {
        let line = lines.next()?;
        let (key, next) = line
            .split_once('\t')
            .ok_or_else(|| lines.corrupt("bad context record"))?;
        let key = key
            .split(',')
            .map(|k| parse_num::<u32>(k, &lines).and_then(|id| in_range(id, &lines)))
            .collect::<Result<Vec<u32>>>()?;
        let mut entries = Vec::new();
        for item in next.split(' ') {
            let (s, c) = item
                .split_once(':')
                .ok_or_else(|| lines.corrupt("bad continuation"))?;
            let count: u64 = parse_num(c, &lines)?;
            if count == 0 {
                return Err(lines.corrupt("zero count"));
            }
            entries.push((in_range(parse_num(s, &lines)?, &lines)?, count));
        }
        let total = entries.iter().map(|&(_, c)| c).sum();
        contexts.insert(key, Continuations { total, next: entries });
    }
    if lines.next()? != "end" {
        return Err(lines.corrupt("missing end marker"));
    }

    let model = BackoffModel::from_parts(smoothing, contexts, floor)?;
    Ok(match kind {
        ModelKind::Planner => AnyModel::Planner(PlannerModel {
            order,
            alphabet,
            model,
        }),
        ModelKind::Refiner => AnyModel::Refiner(RefinerModel {
            stage,
            order,
            alphabet,
            model,
        }),
    })
}

pub fn load_planner(path: &Path) -> Result<PlannerModel> {
    match load_model(path)? {
        AnyModel::Planner(m) => Ok(m),
        AnyModel::Refiner(_) => Err(ModelError::KindMismatch {
            expected: "planner",
            found: "refiner",
        }),
    }
}

pub fn load_refiner(path: &Path) -> Result<RefinerModel> {
    match load_model(path)? {
        AnyModel::Refiner(m) => Ok(m),
        AnyModel::Planner(_) => Err(ModelError::KindMismatch {
            expected: "refiner",
            found: "planner",
        }),
    }
}
