use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use super::{tokenize, Report};
use crate::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;

const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Token/id bijection over tokens seen at least `min_count` times, plus
/// the reserved ids `PAD`, `UNK`, `BOS`, `EOS`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
    counts: BTreeMap<String, usize>,
    min_count: usize,
}

/// Builds the vocabulary from each report's default section.
pub fn build_vocabulary(reports: &[Report], min_count: usize) -> Result<Vocabulary> {
    Vocabulary::build(reports, min_count, None)
}

impl Vocabulary {
    pub fn build(reports: &[Report], min_count: usize, section: Option<&str>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if min_count == 0 {
            return Err(Error::Invalid("min_count must be at least 1".into()));
        }
        let mut counts = BTreeMap::<String, usize>::new();
        for report in reports {
            for token in tokenize(report.section_text(section)) {
                *counts.entry(token).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut kept: Vec<(&String, usize)> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(t, &c)| (t, c))
            .collect();
        // frequent first; ties alphabetical
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t.clone()))
            .collect();
        Ok(Self::from_tokens(tokens, counts, min_count))
    }

    fn from_tokens(tokens: Vec<String>, counts: BTreeMap<String, usize>, min_count: usize) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self {
            tokens,
            ids,
            counts,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn unk_id(&self) -> TokenId {
        UNK
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Corpus frequency, including tokens below the retention threshold.
    pub fn count(&self, token: &str) -> usize {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        self.encode_tokens(&tokenize(text))
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK as usize]).to_string())
            .collect()
    }

    /// Renders ids as text: tokens space-joined with punctuation attached
    /// to the preceding word.
    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        join_tokens(&self.decode(ids))
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for (id, token) in self.tokens.iter().enumerate() {
            writeln!(out, "{token}\t{id}\t{}", self.count(token)).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        let mut counts = BTreeMap::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let bad = |message: &str| Error::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(token), Some(id), Some(count), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected token<TAB>id<TAB>count"));
            };
            let id: usize = id.parse().map_err(|_| bad("bad id"))?;
            let count: usize = count.parse().map_err(|_| bad("bad count"))?;
            if id != tokens.len() {
                return Err(bad("ids must be sorted and contiguous"));
            }
            if id < RESERVED.len() && token != RESERVED[id] {
                return Err(bad("reserved id holds the wrong token"));
            }
            if id >= RESERVED.len() {
                counts.insert(token.to_string(), count);
            }
            tokens.push(token.to_string());
        }
        if tokens.len() < RESERVED.len() {
            return Err(Error::Format("vocabulary is missing reserved tokens".into()));
        }
        let min_count = counts.values().copied().min().unwrap_or(1);
        Ok(Self::from_tokens(tokens, counts, min_count))
    }
}

pub(crate) fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for token in tokens {
        let token = token.as_ref();
        let attach = matches!(token, "." | "," | ";" | ":" | ")");
        if !out.is_empty() && !attach && !out.ends_with('(') {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, Modality};
    use std::collections::BTreeMap;

    fn report(id: &str, text: &str) -> Report {
        Report {
            id: id.into(),
            modality: Modality::Eeg,
            sections: BTreeMap::from([("impression".to_string(), text.to_string())]),
            anchors: vec![],
            signal_ref: None,
        }
    }

    #[test]
    fn threshold_rule() {
        let reports = vec![
            report("a", "seizure seen rarely."),
            report("b", "seizure seen rarely."),
            report("c", "seizure seen."),
        ];
        let v = build_vocabulary(&reports, 3).unwrap();
        assert!(v.id("seizure").is_some());
        assert!(v.id("rarely").is_none());
        assert_eq!(v.count("rarely"), 2);
        assert_eq!(v.encode_tokens(&["rarely"]), vec![UNK]);
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let reports = vec![report("a", "alpha beta gamma."), report("b", "delta.")];
        let v = build_vocabulary(&reports, 1).unwrap();
        assert_eq!(v.len(), 4 + 5);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(matches!(build_vocabulary(&[], 3), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn deterministic_on_synthetic() {
        let a = build_vocabulary(&synth_corpus(7, 50, Modality::Eeg), 3).unwrap();
        let b = build_vocabulary(&synth_corpus(7, 50, Modality::Eeg), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_unk_and_roundtrip() {
        let v = build_vocabulary(&[report("a", "normal study.")], 1).unwrap();
        let ids = v.encode_tokens(&["normal", "zzzz"]);
        assert_eq!(ids, vec![v.id("normal").unwrap(), UNK]);
        assert!(v.encode_tokens::<&str>(&[]).is_empty());
        let toks = ["normal", "study", "."];
        assert_eq!(v.decode(&v.encode_tokens(&toks)), toks);
    }

    #[test]
    fn tsv_roundtrip() {
        let v = build_vocabulary(&synth_corpus(3, 30, Modality::Xray), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.write_tsv(&path).unwrap();
        let back = Vocabulary::read_tsv(&path).unwrap();
        assert_eq!(back.tokens, v.tokens);
        for t in &v.tokens[4..] {
            assert_eq!(back.count(t), v.count(t));
        }
    }

    #[test]
    fn detokenize_attaches_punctuation() {
        assert_eq!(join_tokens(&["no", "acute", "disease", ",", "ok", "."]), "no acute disease, ok.");
    }
}
