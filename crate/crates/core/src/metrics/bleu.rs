use super::ngram::{EvalPair, NGramCounts};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BleuMode {
    /// Statistics pooled over all pairs before combining.
    #[default]
    Corpus,
    /// Mean of per-pair scores.
    SentenceAveraged,
}

/// Clipped n-gram matches and total candidate n-grams of order `n`,
/// summed over `pairs`.
pub fn clipped_precision(pairs: &[EvalPair], n: usize) -> (usize, usize) {
    let (mut hits, mut total) = (0, 0);
    for p in pairs {
        let cand = NGramCounts::new(&p.candidate, n);
        let refs: Vec<NGramCounts> = p.references.iter().map(|r| NGramCounts::new(r, n)).collect();
        for (g, &c) in cand.order(n) {
            let max_ref = refs.iter().map(|r| r.order(n).get(g).copied().unwrap_or(0)).max().unwrap_or(0);
            hits += c.min(max_ref);
            total += c;
        }
    }
    (hits, total)
}

// Reference length closest to `c`; ties go to the shorter one.
fn effective_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(|r| r.len())
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

fn corpus_bleu(pairs: &[EvalPair], n: usize) -> f64 {
    let c: usize = pairs.iter().map(|p| p.candidate.len()).sum();
    if c == 0 {
        return 0.0;
    }
    let r: usize = pairs.iter().map(|p| effective_ref_len(p.candidate.len(), &p.references)).sum();
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (hits, total) = clipped_precision(pairs, k);
        if hits == 0 || total == 0 {
            return 0.0;
        }
        log_sum += (hits as f64 / total as f64).ln();
    }
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / n as f64).exp()
}

/// Corpus-level BLEU-`n` with clipped counts and the closest-reference
/// brevity penalty.
pub fn bleu(pairs: &[EvalPair], n: usize) -> f64 {
    bleu_with(pairs, n, BleuMode::Corpus)
}

pub fn bleu_with(pairs: &[EvalPair], n: usize, mode: BleuMode) -> f64 {
    assert!((1..=super::MAX_ORDER).contains(&n), "BLEU order must be 1..=4");
    if pairs.is_empty() {
        return 0.0;
    }
    match mode {
        BleuMode::Corpus => corpus_bleu(pairs, n),
        BleuMode::SentenceAveraged => {
            pairs.iter().map(|p| corpus_bleu(std::slice::from_ref(p), n)).sum::<f64>() / pairs.len() as f64
        }
    }
}
