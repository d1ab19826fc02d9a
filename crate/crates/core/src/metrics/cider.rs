use std::collections::{BTreeMap, BTreeSet};

use super::ngram::{EvalPair, NGramCounts, MAX_ORDER};

/// Document frequencies for the CIDEr idf weights. A document is one
/// reference set; `ln(N / df)` weights each n-gram, with unseen n-grams
/// treated as `df = 1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CiderIdf {
    num_docs: f64,
    df: BTreeMap<Vec<String>, f64>,
}

impl CiderIdf {
    pub fn from_pairs(pairs: &[EvalPair]) -> Self {
        Self::from_documents(pairs.iter().map(|p| (p.references.as_slice(), 1.0)))
    }

    /// Weighted documents: each document counts `weight` times.
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = (&'a [Vec<String>], f64)>,
    {
        let mut idf = Self::default();
        for (refs, weight) in docs {
            let mut seen = BTreeSet::new();
            for r in refs {
                let counts = NGramCounts::new(r, MAX_ORDER);
                for n in 1..=MAX_ORDER {
                    seen.extend(counts.order(n).keys().cloned());
                }
            }
            for g in seen {
                *idf.df.entry(g).or_insert(0.0) += weight;
            }
            idf.num_docs += weight;
        }
        idf
    }

    pub fn num_docs(&self) -> f64 {
        self.num_docs
    }

    pub fn weight(&self, gram: &[String]) -> f64 {
        let df = self.df.get(gram).copied().unwrap_or(0.0).max(1.0);
        if self.num_docs <= 0.0 {
            return 0.0;
        }
        (self.num_docs / df).ln().max(0.0)
    }
}

// tf-idf vector of order `n`: term frequency is the count over the total
// number of n-grams of that order.
fn tfidf(tokens: &[String], n: usize, idf: &CiderIdf) -> BTreeMap<Vec<String>, f64> {
    let counts = NGramCounts::new(tokens, n);
    let grams = counts.order(n);
    let total: usize = grams.values().sum();
    grams
        .iter()
        .map(|(g, &c)| (g.clone(), c as f64 / total as f64 * idf.weight(g)))
        .collect()
}

fn cosine(a: &BTreeMap<Vec<String>, f64>, b: &BTreeMap<Vec<String>, f64>) -> f64 {
    let na = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, v)| b.get(g).map(|w| v * w)).sum();
    dot / (na * nb)
}

fn pair_score(p: &EvalPair, idf: &CiderIdf) -> f64 {
    let mut total = 0.0;
    for n in 1..=MAX_ORDER {
        let cand = tfidf(&p.candidate, n, idf);
        let mut mean: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        for r in &p.references {
            for (g, v) in tfidf(r, n, idf) {
                *mean.entry(g).or_insert(0.0) += v;
            }
        }
        let k = p.references.len().max(1) as f64;
        mean.values_mut().for_each(|v| *v /= k);
        total += cosine(&cand, &mean);
    }
    10.0 / MAX_ORDER as f64 * total
}

/// Corpus CIDEr with idf taken from the pairs' own reference sets.
pub fn cider(pairs: &[EvalPair]) -> f64 {
    cider_with_idf(pairs, &CiderIdf::from_pairs(pairs))
}

pub fn cider_with_idf(pairs: &[EvalPair], idf: &CiderIdf) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|p| pair_score(p, idf)).sum::<f64>() / pairs.len() as f64
}
