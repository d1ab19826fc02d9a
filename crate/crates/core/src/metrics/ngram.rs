use std::collections::BTreeMap;

use crate::corpus::tokenize;

pub const MAX_ORDER: usize = 4;

/// N-gram multiset of one token list, orders 1 through `max_order`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NGramCounts {
    orders: Vec<BTreeMap<Vec<String>, usize>>,
}

impl NGramCounts {
    pub fn new(tokens: &[String], max_order: usize) -> Self {
        let orders = (1..=max_order)
            .map(|n| {
                let mut m = BTreeMap::new();
                for w in tokens.windows(n) {
                    *m.entry(w.to_vec()).or_insert(0) += 1;
                }
                m
            })
            .collect();
        Self { orders }
    }

    /// Counts of order `n` (1-based).
    pub fn order(&self, n: usize) -> &BTreeMap<Vec<String>, usize> {
        &self.orders[n - 1]
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }
}

/// A candidate token list with its references.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPair {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalPair {
    pub fn new(candidate: Vec<String>, references: Vec<Vec<String>>) -> Self {
        Self { candidate, references }
    }

    /// Tokenizes raw strings with the corpus tokenizer.
    pub fn from_text(candidate: &str, references: &[&str]) -> Self {
        Self {
            candidate: tokenize(candidate),
            references: references.iter().map(|r| tokenize(r)).collect(),
        }
    }
}
