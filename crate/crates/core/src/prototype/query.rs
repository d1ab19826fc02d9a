use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, AnchorWord, TokenId, Vocabulary, UNK};
use crate::{Error, Result};

pub const ANCHOR_BOOST: f64 = 2.0;
pub const PREFIX_BOOST: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryTerm {
    pub id: TokenId,
    pub boost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub terms: Vec<QueryTerm>,
    pub boost: f64,
}

impl Query {
    pub fn new(terms: impl IntoIterator<Item = TokenId>) -> Self {
        Self {
            terms: terms
                .into_iter()
                .map(|id| QueryTerm { id, boost: 1.0 })
                .collect(),
            boost: 1.0,
        }
    }

    pub fn with_term_boost(mut self, boost: f64) -> Self {
        for t in &mut self.terms {
            t.boost = boost;
        }
        self
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.terms.iter().any(|t| t.id == id)
    }
}

/// Anchor tokens (boost [`ANCHOR_BOOST`]) followed by prefix tokens
/// (boost [`PREFIX_BOOST`]). Out-of-vocabulary terms are dropped, so the
/// resulting query may be empty.
pub fn make_query(anchors: &[AnchorWord], prefix: Option<&str>, vocab: &Vocabulary) -> Result<Query> {
    make_query_with(anchors, prefix, vocab, ANCHOR_BOOST, PREFIX_BOOST)
}

pub fn make_query_with(
    anchors: &[AnchorWord],
    prefix: Option<&str>,
    vocab: &Vocabulary,
    anchor_boost: f64,
    prefix_boost: f64,
) -> Result<Query> {
    let prefix = prefix.filter(|p| !p.trim().is_empty());
    if anchors.is_empty() && prefix.is_none() {
        return Err(Error::Invalid("query needs anchors or a prefix".into()));
    }
    let anchor_terms = anchors
        .iter()
        .flat_map(|a| tokenize(a.label()))
        .map(|t| (t, anchor_boost));
    let prefix_terms = prefix
        .into_iter()
        .flat_map(tokenize)
        .map(|t| (t, prefix_boost));
    let terms = anchor_terms
        .chain(prefix_terms)
        .map(|(t, boost)| QueryTerm {
            id: vocab.encode_tokens(&[t])[0],
            boost,
        })
        .filter(|t| t.id != UNK)
        .collect();
    Ok(Query { terms, boost: 1.0 })
}
