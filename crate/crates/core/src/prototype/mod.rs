//! The prototype repository: every distinct report sentence, weighted by
//! how often it occurs, behind an incrementally updatable inverted index.
//!
//! Scoring is the classic tf-idf variant
//!
//! ```text
//! score(q, d) = coord(q, d) · queryNorm(q) · Σ_{t ∈ q} tf(t, d) · idf(t)² · boost(t) · norm(t, d)
//! ```
//!
//! with `tf = sqrt(count)`, `idf = 1 + ln(N / (df + 1))`,
//! `queryNorm = 1 / sqrt(Σ (idf · boost)²)` and
//! `norm = 1 / sqrt(|d|) · (1 + ln(weight))`. Query terms are a list;
//! a repeated term contributes once per occurrence.

mod index;
mod query;

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Report, TokenId, Vocabulary};
use crate::{Error, Result};

pub use index::{idf, InvertedIndex};
pub use query::{make_query, make_query_with, Query, QueryTerm, ANCHOR_BOOST, PREFIX_BOOST};

pub type SentenceId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeEntry {
    pub sentence_id: SentenceId,
    pub raw: String,
    pub tokens: Vec<TokenId>,
    pub weight: u64,
    pub length_norm: f64,
}

impl PrototypeEntry {
    /// Index-time factor `lengthNorm · (1 + ln weight)`.
    pub fn norm(&self) -> f64 {
        self.length_norm * (1.0 + (self.weight as f64).ln())
    }

    fn term_count(&self, term: TokenId) -> usize {
        self.tokens.iter().filter(|&&t| t == term).count()
    }
}

/// Lowercased, whitespace-collapsed key used for sentence identity.
pub fn normalize_sentence(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug)]
pub struct PrototypeRepository {
    vocab: Arc<Vocabulary>,
    section: Option<String>,
    entries: Vec<PrototypeEntry>,
    by_key: HashMap<String, SentenceId>,
    index: InvertedIndex,
}

impl PartialEq for PrototypeRepository {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.index == other.index
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    num_docs: usize,
    vocab_ref: String,
}

#[derive(Serialize, Deserialize)]
struct SnapshotEntry {
    sid: SentenceId,
    raw: String,
    weight: u64,
}

impl PrototypeRepository {
    pub fn empty(vocab: Arc<Vocabulary>) -> Self {
        Self {
            vocab,
            section: None,
            entries: Vec::new(),
            by_key: HashMap::new(),
            index: InvertedIndex::default(),
        }
    }

    /// Builds from each report's default section. Sentence ids follow first
    /// occurrence in corpus order.
    pub fn build(reports: &[Report], vocab: Arc<Vocabulary>) -> Result<Self> {
        Self::build_in(reports, vocab, None)
    }

    pub fn build_in(reports: &[Report], vocab: Arc<Vocabulary>, section: Option<&str>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut repo = Self::empty(vocab);
        repo.section = section.map(str::to_string);
        for report in reports {
            repo.add_report(report);
        }
        if repo.entries.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(repo)
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn entries(&self) -> &[PrototypeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sid: SentenceId) -> Option<&PrototypeEntry> {
        self.entries.get(sid as usize)
    }

    pub fn contains_sentence(&self, raw: &str) -> bool {
        self.by_key.contains_key(&normalize_sentence(raw))
    }

    /// Adds the sentences of `report`: known sentences gain weight, new
    /// ones get fresh ids and are indexed.
    pub fn add_report(&mut self, report: &Report) {
        for sentence in report.sentences(self.section.as_deref()) {
            self.add_sentence(&sentence, 1);
        }
    }

    fn add_sentence(&mut self, raw: &str, weight: u64) {
        let key = normalize_sentence(raw);
        if let Some(&sid) = self.by_key.get(&key) {
            self.entries[sid as usize].weight += weight;
            return;
        }
        let tokens = self.vocab.encode(raw);
        if tokens.is_empty() {
            return;
        }
        let sid = self.entries.len() as SentenceId;
        self.index.insert(sid, &tokens);
        self.entries.push(PrototypeEntry {
            sentence_id: sid,
            raw: raw.trim().to_string(),
            length_norm: 1.0 / (tokens.len() as f64).sqrt(),
            tokens,
            weight,
        });
        self.by_key.insert(key, sid);
    }

    pub fn idf(&self, term: TokenId) -> f64 {
        idf(&self.index, term)
    }

    /// Score of one entry, evaluated directly from the entry's tokens.
    pub fn score(&self, query: &Query, entry: &PrototypeEntry) -> Result<f64> {
        score(query, entry, &self.index)
    }

    /// Top-`k` entries with positive score: score desc, weight desc,
    /// sentence id asc. Term-at-a-time over the postings.
    pub fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<(&PrototypeEntry, f64)>> {
        if query.terms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        let qnorm = query_norm(query, &self.index);
        let mut acc: HashMap<SentenceId, (f64, usize)> = HashMap::new();
        for term in &query.terms {
            let term_idf = self.idf(term.id);
            let Some(postings) = self.index.postings(term.id) else {
                continue;
            };
            for &(sid, tf) in postings {
                let entry = &self.entries[sid as usize];
                let slot = acc.entry(sid).or_insert((0.0, 0));
                slot.0 += term_weight(tf as f64, term_idf, term.boost, entry.norm());
                slot.1 += 1;
            }
        }
        let n_terms = query.terms.len() as f64;
        let mut ranked: Vec<(&PrototypeEntry, f64)> = acc
            .into_iter()
            .map(|(sid, (sum, matched))| {
                let coord = matched as f64 / n_terms;
                (&self.entries[sid as usize], finish(coord, qnorm, sum, query.boost))
            })
            .filter(|(_, s)| *s > 0.0)
            .collect();
        ranked.sort_by(|a, b| rank_order((a.0, a.1), (b.0, b.1)));
        ranked.truncate(k);
        Ok(ranked)
    }

    pub fn save(&self, path: &Path, vocab_ref: &str) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let header = SnapshotHeader {
            num_docs: self.entries.len(),
            vocab_ref: vocab_ref.to_string(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        for e in &self.entries {
            let line = SnapshotEntry {
                sid: e.sentence_id,
                raw: e.raw.clone(),
                weight: e.weight,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads the `vocab_ref` named in a snapshot header.
    pub fn snapshot_vocab_ref(path: &Path) -> Result<String> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        std::io::BufReader::new(file)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        let header: SnapshotHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        Ok(header.vocab_ref)
    }

    /// Loads a snapshot; postings are rebuilt from the entries.
    pub fn load(path: &Path, vocab: Arc<Vocabulary>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
            line,
            message: e.to_string(),
        };
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Format("empty repository snapshot".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: SnapshotHeader = serde_json::from_str(&header_line).map_err(|e| parse_err(1, e))?;
        let mut repo = Self::empty(vocab);
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: SnapshotEntry = serde_json::from_str(&line).map_err(|e| parse_err(n + 2, e))?;
            if entry.sid as usize != repo.entries.len() || entry.weight == 0 {
                return Err(Error::Parse {
                    line: n + 2,
                    message: "sentence ids must be contiguous with positive weights".into(),
                });
            }
            repo.add_sentence(&entry.raw, entry.weight);
            if repo.entries.len() != entry.sid as usize + 1 {
                return Err(Error::Parse {
                    line: n + 2,
                    message: "duplicate or empty sentence".into(),
                });
            }
        }
        if repo.entries.len() != header.num_docs {
            return Err(Error::Format(format!(
                "header declares {} sentences, found {}",
                header.num_docs,
                repo.entries.len()
            )));
        }
        Ok(repo)
    }
}

fn term_weight(tf_raw: f64, idf: f64, boost: f64, norm: f64) -> f64 {
    tf_raw.sqrt() * idf * idf * boost * norm
}

fn finish(coord: f64, qnorm: f64, sum: f64, query_boost: f64) -> f64 {
    if coord == 0.0 {
        0.0
    } else {
        coord * qnorm * sum * query_boost
    }
}

fn query_norm(query: &Query, index: &InvertedIndex) -> f64 {
    let sum_sq: f64 = query
        .terms
        .iter()
        .map(|t| (idf(index, t.id) * t.boost).powi(2))
        .sum();
    1.0 / sum_sq.sqrt()
}

/// Scores `entry` against `query` straight from the entry's tokens.
pub fn score(query: &Query, entry: &PrototypeEntry, index: &InvertedIndex) -> Result<f64> {
    if query.terms.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut sum = 0.0;
    let mut matched = 0usize;
    for term in &query.terms {
        let tf = entry.term_count(term.id);
        if tf > 0 {
            matched += 1;
            sum += term_weight(tf as f64, idf(index, term.id), term.boost, entry.norm());
        }
    }
    let coord = matched as f64 / query.terms.len() as f64;
    Ok(finish(coord, query_norm(query, index), sum, query.boost))
}

/// Ranking order: score desc, weight desc, sentence id asc.
pub fn rank_order(a: (&PrototypeEntry, f64), b: (&PrototypeEntry, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| b.0.weight.cmp(&a.0.weight))
        .then_with(|| a.0.sentence_id.cmp(&b.0.sentence_id))
}
