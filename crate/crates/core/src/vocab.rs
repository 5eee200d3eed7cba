use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::metrics::tokenize;

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<s>";
pub const SEP: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const SOURCE: &str = "<source>";
pub const CANDIDATE1: &str = "<candidate1>";
pub const CANDIDATE2: &str = "<candidate2>";

pub const SPECIAL_TOKENS: [&str; 7] = [PAD, BOS, SEP, UNK, SOURCE, CANDIDATE1, CANDIDATE2];

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const SEP_ID: usize = 2;
pub const UNK_ID: usize = 3;
pub const SOURCE_ID: usize = 4;
pub const CANDIDATE1_ID: usize = 5;
pub const CANDIDATE2_ID: usize = 6;

/// Word-level vocabulary over the metric tokenizer, special tokens first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Most frequent words first (ties alphabetical), capped at `max_size` entries in total.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_size: usize, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in texts {
            for tok in tokenize(t) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut words: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && !SPECIAL_TOKENS.contains(&w.as_str()))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let room = max_size.saturating_sub(SPECIAL_TOKENS.len());
        let tokens: Vec<String> = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().take(room).map(|(w, _)| w))
            .collect();
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    pub fn has_special_tokens(&self) -> bool {
        SPECIAL_TOKENS
            .iter()
            .enumerate()
            .all(|(i, s)| self.tokens.get(i).map(String::as_str) == Some(*s))
    }
}
