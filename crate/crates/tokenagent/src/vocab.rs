//! Token vocabulary with reserved control markers.
//!
//! Tokens are atomic symbols (one token per entity, relation, or control
//! marker), so the whole vocabulary stays small and parsing is exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a token symbol in a [`Vocabulary`].
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum VocabError {
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("vocabulary must hold at least the {expected} reserved tokens, got {got}")]
    TooSmall { expected: usize, got: usize },
    #[error("reserved index {0} out of range")]
    ReservedOutOfRange(u32),
    #[error("reserved indices must be mutually distinct")]
    ReservedClash,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

/// Indices of the control tokens every run needs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reserved {
    pub tool_open: TokenId,
    pub tool_close: TokenId,
    pub obs_open: TokenId,
    pub obs_close: TokenId,
    pub ans_open: TokenId,
    pub ans_close: TokenId,
    pub eos: TokenId,
    pub pad: TokenId,
}

impl Reserved {
    fn all(&self) -> [TokenId; 8] {
        [
            self.tool_open,
            self.tool_close,
            self.obs_open,
            self.obs_close,
            self.ans_open,
            self.ans_close,
            self.eos,
            self.pad,
        ]
    }
}

/// Ordered list of distinct token symbols plus the reserved control set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    symbols: Vec<String>,
    #[serde(skip)]
    by_symbol: HashMap<String, TokenId>,
    reserved: Reserved,
}

impl Vocabulary {
    pub fn new(symbols: Vec<String>, reserved: Reserved) -> Result<Self, VocabError> {
        if symbols.len() < 8 {
            return Err(VocabError::TooSmall {
                expected: 8,
                got: symbols.len(),
            });
        }
        let mut by_symbol = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if by_symbol.insert(s.clone(), TokenId(i as u32)).is_some() {
                return Err(VocabError::DuplicateSymbol(s.clone()));
            }
        }
        let all = reserved.all();
        for t in all {
            if t.index() >= symbols.len() {
                return Err(VocabError::ReservedOutOfRange(t.0));
            }
        }
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if all[i] == all[j] {
                    return Err(VocabError::ReservedClash);
                }
            }
        }
        Ok(Self {
            symbols,
            by_symbol,
            reserved,
        })
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn reserved(&self) -> &Reserved {
        &self.reserved
    }

    pub fn contains(&self, token: TokenId) -> bool {
        token.index() < self.symbols.len()
    }

    pub fn symbol(&self, token: TokenId) -> &str {
        &self.symbols[token.index()]
    }

    pub fn lookup(&self, symbol: &str) -> Result<TokenId, VocabError> {
        self.by_symbol
            .get(symbol)
            .copied()
            .ok_or_else(|| VocabError::UnknownSymbol(symbol.to_string()))
    }

    /// Rebuild the symbol index after deserialization.
    pub fn reindex(&mut self) {
        self.by_symbol = self
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), TokenId(i as u32)))
            .collect();
    }

    pub fn decode(&self, tokens: &[TokenId]) -> Vec<String> {
        tokens.iter().map(|t| self.symbol(*t).to_string()).collect()
    }
}
