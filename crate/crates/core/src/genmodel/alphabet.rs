use std::collections::{BTreeSet, HashMap};

use sha2::{Digest, Sha256};

use crate::corpus::escape_token;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const SEP: &str = "<sep>";
pub const EMIT: &str = "<emit>";
pub const END: &str = "<end>";

/// Symbol id that matches no stored context.
pub const UNK: u32 = u32::MAX;

/// Sorted symbol table; ids are positions in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, u32>,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = String>>(symbols: I) -> Self {
        let sorted: BTreeSet<String> = symbols.into_iter().collect();
        Self::from_sorted(sorted.into_iter().collect())
    }

    /// Builds from symbols already in id order (as read from a model file).
    pub(crate) fn from_sorted(symbols: Vec<String>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Self { symbols, index }
    }

    pub fn id(&self, symbol: &str) -> Option<u32> {
        self.index.get(symbol).copied()
    }

    pub fn id_or_unk(&self, symbol: &str) -> u32 {
        self.id(symbol).unwrap_or(UNK)
    }

    pub fn symbol(&self, id: u32) -> &str {
        &self.symbols[id as usize]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.symbols {
            h.update(escape_token(s).as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}
