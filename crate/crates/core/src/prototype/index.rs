use std::collections::BTreeMap;

use super::SentenceId;
use crate::corpus::TokenId;

/// Term → postings of `(sentence id, raw term frequency)`, kept sorted by
/// sentence id since ids are only ever appended.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvertedIndex {
    postings: BTreeMap<TokenId, Vec<(SentenceId, u32)>>,
    num_docs: usize,
}

impl InvertedIndex {
    pub(super) fn insert(&mut self, sid: SentenceId, tokens: &[TokenId]) {
        let mut tf = BTreeMap::<TokenId, u32>::new();
        for &t in tokens {
            *tf.entry(t).or_default() += 1;
        }
        for (term, count) in tf {
            self.postings.entry(term).or_default().push((sid, count));
        }
        self.num_docs += 1;
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn doc_freq(&self, term: TokenId) -> usize {
        self.postings.get(&term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: TokenId) -> Option<&[(SentenceId, u32)]> {
        self.postings.get(&term).map(Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.postings.keys().copied()
    }
}

/// `1 + ln(N / (df + 1))`; unseen terms have `df = 0`.
pub fn idf(index: &InvertedIndex, term: TokenId) -> f64 {
    1.0 + (index.num_docs as f64 / (index.doc_freq(term) as f64 + 1.0)).ln()
}
