use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{tokenize, AnchorWord, Modality};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn pair(c: &str, refs: &[&str]) -> EvalPair {
    EvalPair::new(toks(c), refs.iter().map(|r| toks(r)).collect())
}

// Brute-force clipped counting: for every candidate position, count the
// gram's occurrences by scanning.
fn occurrences(list: &[String], gram: &[String]) -> usize {
    if gram.len() > list.len() {
        return 0;
    }
    (0..=list.len() - gram.len()).filter(|&i| &list[i..i + gram.len()] == gram).count()
}

fn oracle_bleu(pairs: &[EvalPair], n: usize) -> f64 {
    let mut logs = 0.0;
    for k in 1..=n {
        let (mut hit, mut tot) = (0.0, 0.0);
        for p in pairs {
            if p.candidate.len() < k {
                continue;
            }
            let mut done: Vec<&[String]> = Vec::new();
            for i in 0..=p.candidate.len() - k {
                let g = &p.candidate[i..i + k];
                if done.contains(&g) {
                    continue;
                }
                done.push(g);
                let c = occurrences(&p.candidate, g);
                let m = p.references.iter().map(|r| occurrences(r, g)).max().unwrap();
                hit += c.min(m) as f64;
                tot += c as f64;
            }
        }
        if hit == 0.0 {
            return 0.0;
        }
        logs += (hit / tot).ln() / n as f64;
    }
    let c: f64 = pairs.iter().map(|p| p.candidate.len() as f64).sum();
    let mut r = 0.0;
    for p in pairs {
        let cl = p.candidate.len() as i64;
        let mut best = i64::MAX;
        for rf in &p.references {
            let l = rf.len() as i64;
            if (l - cl).abs() < (best - cl).abs() || ((l - cl).abs() == (best - cl).abs() && l < best) {
                best = l;
            }
        }
        r += best as f64;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * logs.exp()
}

#[test]
fn identical_candidates_score_one() {
    let pairs = vec![pair("a b c d e", &["a b c d e"]), pair("x y z w", &["x y z w", "q"])];
    assert_eq!(bleu(&pairs, 4), 1.0);
}

#[test]
fn clipped_unigram_precision_hand_count() {
    let p = vec![pair("the the the the the the the", &["the cat is on the mat"])];
    assert_eq!(clipped_precision(&p, 1), (2, 7));
    assert!((bleu(&p, 1) - 2.0 / 7.0).abs() < 1e-12);
}

#[test]
fn no_overlap_bleu_is_zero() {
    assert_eq!(bleu(&[pair("a b", &["c d"])], 1), 0.0);
}

#[test]
fn brevity_penalty_uses_closest_shorter_on_tie() {
    // Candidate length 4; references of length 3 and 5 are equally close.
    let p = vec![pair("a b c d", &["a b c", "a b c d e"])];
    assert_eq!(bleu(&p, 1), 1.0);
    let short = vec![pair("a b", &["a b c d"])];
    assert!((bleu(&short, 1) - (1.0f64 - 2.0).exp()).abs() < 1e-12);
}

#[test]
fn sentence_averaged_mode_differs_from_corpus() {
    let pairs = vec![pair("a b c", &["a b c"]), pair("x", &["y z"])];
    assert_eq!(bleu_with(&pairs, 1, BleuMode::SentenceAveraged), 0.5);
    assert!(bleu(&pairs, 1) > 0.5);
}

#[test]
fn cider_disjoint_identity_is_ten() {
    let pairs = vec![
        pair("a b c d e", &["a b c d e"]),
        pair("f g h i", &["f g h i"]),
        pair("j k l m n o", &["j k l m n o"]),
    ];
    assert!((cider(&pairs) - 10.0).abs() < 1e-9);
}

#[test]
fn cider_single_pair_has_zero_idf() {
    // With one document every n-gram has df = N, so every weight vanishes.
    assert_eq!(cider(&[pair("a b c d", &["a b c d"])]), 0.0);
}

#[test]
fn cider_no_shared_gram_is_zero() {
    let pairs = vec![pair("a b c", &["d e f"]), pair("g h", &["i j"])];
    assert_eq!(cider(&pairs), 0.0);
}

#[test]
fn cider_duplication_and_order_invariance() {
    let pairs = vec![
        // Every candidate n-gram occurs in some reference set, so idf
        // scales identically when the corpus is doubled.
        pair("no acute disease", &["no acute disease seen", "acute disease absent"]),
        pair("heart size is", &["heart size is normal"]),
        pair("small right effusion", &["small right effusion", "small left"]),
    ];
    let base = cider(&pairs);
    let doubled: Vec<EvalPair> = pairs.iter().chain(pairs.iter()).cloned().collect();
    assert!((cider(&doubled) - base).abs() < 1e-12);
    let rev: Vec<EvalPair> = pairs.iter().rev().cloned().collect();
    assert!((cider(&rev) - base).abs() < 1e-12);
}

// Straight-line CIDEr over token lists with linear-scan counting.
fn oracle_cider(pairs: &[EvalPair]) -> f64 {
    let n_docs = pairs.len() as f64;
    let grams = |t: &[String], n: usize| -> Vec<Vec<String>> { t.windows(n).map(|w| w.to_vec()).collect() };
    let df = |g: &Vec<String>| -> f64 {
        pairs
            .iter()
            .filter(|p| p.references.iter().any(|r| occurrences(r, g) > 0))
            .count()
            .max(1) as f64
    };
    let vec_of = |t: &[String], n: usize, vocab: &[Vec<String>]| -> Vec<f64> {
        let total = grams(t, n).len() as f64;
        vocab
            .iter()
            .map(|g| if total == 0.0 { 0.0 } else { occurrences(t, g) as f64 / total * (n_docs / df(g)).ln() })
            .collect()
    };
    let mut sum = 0.0;
    for p in pairs {
        for n in 1..=4 {
            let mut vocab: Vec<Vec<String>> = grams(&p.candidate, n);
            for r in &p.references {
                vocab.extend(grams(r, n));
            }
            vocab.sort();
            vocab.dedup();
            let c = vec_of(&p.candidate, n, &vocab);
            let mut m = vec![0.0; vocab.len()];
            for r in &p.references {
                for (a, b) in m.iter_mut().zip(vec_of(r, n, &vocab)) {
                    *a += b / p.references.len() as f64;
                }
            }
            let dot: f64 = c.iter().zip(&m).map(|(a, b)| a * b).sum();
            let (na, nb) = (c.iter().map(|a| a * a).sum::<f64>().sqrt(), m.iter().map(|a| a * a).sum::<f64>().sqrt());
            if na > 0.0 && nb > 0.0 {
                sum += 2.5 * dot / (na * nb);
            }
        }
    }
    sum / n_docs
}

fn random_pairs(seed: u64, n: usize) -> Vec<EvalPair> {
    let words = ["a", "b", "c", "d", "e", "f", "g"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sent = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.gen_range(1..8);
        (0..len).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect()
    };
    (0..n)
        .map(|_| {
            let c = sent(&mut rng);
            let k = rng.gen_range(1..4);
            let refs = (0..k).map(|_| sent(&mut rng)).collect();
            EvalPair::new(c, refs)
        })
        .collect()
}

proptest! {
    #[test]
    fn bleu_matches_oracle(seed in 0u64..10_000, n in 1usize..=4, len in 1usize..8) {
        let pairs = random_pairs(seed, len);
        let got = bleu(&pairs, n);
        let want = oracle_bleu(&pairs, n);
        prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn cider_matches_oracle(seed in 0u64..10_000, len in 1usize..8) {
        let pairs = random_pairs(seed, len);
        let got = cider(&pairs);
        prop_assert!((got - oracle_cider(&pairs)).abs() < 1e-9);
        prop_assert!(got >= 0.0);
        let idf = CiderIdf::from_pairs(&pairs);
        for p in &pairs {
            prop_assert!(cider_with_idf(std::slice::from_ref(p), &idf) <= 10.0 + 1e-9);
        }
    }

    #[test]
    fn identity_bleu_is_one(seed in 0u64..10_000) {
        let pairs: Vec<EvalPair> = random_pairs(seed, 4)
            .into_iter()
            .filter(|p| p.candidate.len() >= 4)
            .map(|p| EvalPair::new(p.candidate.clone(), vec![p.candidate]))
            .collect();
        prop_assume!(!pairs.is_empty());
        prop_assert_eq!(bleu(&pairs, 4), 1.0);
    }

    #[test]
    fn dropping_a_matching_gram_never_helps(seed in 0u64..10_000) {
        let pairs = random_pairs(seed, 1);
        let p = &pairs[0];
        let r = &p.references[0];
        // Remove the first candidate unigram that matches some reference.
        if let Some(i) = p.candidate.iter().position(|t| r.contains(t)) {
            let mut cand = p.candidate.clone();
            cand.remove(i);
            let after = vec![EvalPair::new(cand, p.references.clone())];
            prop_assert!(clipped_precision(&after, 1).0 <= clipped_precision(&pairs, 1).0);
        }
    }

    #[test]
    fn pr_auc_matches_exhaustive_thresholds(seed in 0u64..10_000, n in 1usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 / 5.0).collect();
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        prop_assert_eq!(pr_auc(&scores, &truth), oracle_pr_auc(&scores, &truth));
    }
}

// Every distinct score is a threshold; precision and recall are recounted
// from scratch at each one.
fn oracle_pr_auc(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let pos = truth.iter().filter(|&&t| t).count();
    if pos == 0 {
        return None;
    }
    let mut th: Vec<f64> = scores.to_vec();
    th.sort_by(|a, b| b.total_cmp(a));
    th.dedup();
    let mut area = 0.0;
    let mut prev_r = 0.0;
    for t in th {
        let sel: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = sel.iter().filter(|&&i| truth[i]).count();
        let r = tp as f64 / pos as f64;
        let p = tp as f64 / sel.len() as f64;
        area += (r - prev_r) * p;
        prev_r = r;
    }
    Some(area)
}

#[test]
fn pr_auc_simple_cases() {
    assert_eq!(pr_auc(&[0.9, 0.1], &[true, false]), Some(1.0));
    assert_eq!(pr_auc(&[0.1, 0.9], &[true, false]), Some(0.5));
    assert_eq!(pr_auc(&[0.5, 0.5], &[true, false]), Some(0.5));
    assert_eq!(pr_auc(&[0.5], &[false]), None);
}

#[test]
fn accuracy_of_exact_and_constant_classifiers() {
    let truth = vec![vec![true, false], vec![false, true]];
    let exact: Vec<Vec<f64>> = truth.iter().map(|r| r.iter().map(|&t| t as u8 as f64).collect()).collect();
    assert_eq!(averaged_accuracy(&exact, &truth), 1.0);
    assert_eq!(mean_pr_auc(&exact, &truth), 1.0);
    let negative = vec![vec![0.0, 0.0]; 2];
    assert_eq!(averaged_accuracy(&negative, &truth), 0.5);
}

#[test]
fn text_encoding_lowercases_and_truncates() {
    let c = encode_text("Ab\t1-", 10);
    assert_eq!(c, vec![Some(0), Some(1), Some(36), Some(27), None]);
    assert_eq!(encode_text(&"a".repeat(20), 8).len(), 8);
    assert_eq!(ALPHABET.chars().count(), 43);
}

fn tiny_config(seed: u64) -> PhenotypeConfig {
    PhenotypeConfig {
        filters: 6,
        kernel: 3,
        max_len: 64,
        train: crate::nn::TrainConfig {
            seed,
            ..PhenotypeConfig::default().train
        },
    }
}

#[test]
fn phenotype_gradients_match_finite_differences() {
    let clf = PhenotypeClassifier::new(Modality::Eeg, &tiny_config(3));
    let t: Vec<f64> = (0..9).map(|i| (i % 2) as f64).collect();
    let text = "focal slowing is seen over the left temporal region .";
    let report = crate::nn::gradient_check(clf.params(), |p| clf.loss(p, text, &t), Default::default()).unwrap();
    assert!(report.passes(1e-4), "{report:?}");
}

#[test]
fn phenotype_overfits_single_example_and_is_deterministic() {
    let labels = vec![AnchorWord::parse(Modality::Eeg, "Seizure").unwrap()];
    let data = vec![("a brief seizure arises from the left temporal region .".to_string(), labels)];
    let mut cfg = tiny_config(1);
    cfg.train.epochs = 200;
    cfg.train.adam.lr = 0.02;
    let a = train_phenotype_classifier(Modality::Eeg, &data, &cfg).unwrap();
    assert!(a.final_loss().unwrap() < 0.01, "{:?}", a.final_loss());
    let b = train_phenotype_classifier(Modality::Eeg, &data, &cfg).unwrap();
    assert_eq!(a.params(), b.params());
}

#[test]
fn phenotype_learns_template_keyed_labels() {
    let corpus = crate::corpus::synth_corpus(5, 300, Modality::Eeg);
    let data: Vec<(String, Vec<AnchorWord>)> =
        corpus.iter().map(|r| (r.section_text(None).to_string(), r.anchors.clone())).collect();
    let (train, test) = data.split_at(240);
    let mut cfg = PhenotypeConfig::default();
    cfg.train.epochs = 40;
    cfg.train.adam.lr = 1e-2;
    let clf = train_phenotype_classifier(Modality::Eeg, train, &cfg).unwrap();
    let texts: Vec<String> = test.iter().map(|(t, _)| t.clone()).collect();
    let gold: Vec<Vec<AnchorWord>> = test.iter().map(|(_, l)| l.clone()).collect();
    let s = phenotype_eval(&texts, &gold, &clf).unwrap();
    assert!(s.accuracy >= 0.95, "{s:?}");
}

#[test]
fn phenotype_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let clf = PhenotypeClassifier::new(Modality::Xray, &tiny_config(2));
    let (bin, json) = (dir.path().join("p.bin"), dir.path().join("p.json"));
    clf.save(&bin, &json).unwrap();
    let back = PhenotypeClassifier::load(&bin, &json).unwrap();
    assert_eq!(back.params(), clf.params());
    assert_eq!(back.probabilities("small left effusion ."), clf.probabilities("small left effusion ."));
}

#[test]
fn evaluate_records_reports_all_metrics() {
    let records = vec![
        EvalRecord {
            id: "a".into(),
            candidate: "No acute disease.".into(),
            references: vec!["no acute disease .".into()],
            gold_anchors: vec!["No Finding".into()],
        },
        EvalRecord {
            id: "b".into(),
            candidate: "Heart size is normal.".into(),
            references: vec!["heart size is normal .".into()],
            gold_anchors: vec![],
        },
    ];
    let out = evaluate_records(&records, None).unwrap();
    assert_eq!(out.bleu4, 1.0);
    assert!(out.phenotype_accuracy.is_none());
    let clf = PhenotypeClassifier::new(Modality::Xray, &tiny_config(0));
    let out = evaluate_records(&records, Some(&clf)).unwrap();
    assert!(out.phenotype_accuracy.is_some());
    assert_eq!(tokenize("No acute disease."), toks("no acute disease ."));
}
