use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{AnchorWord, Modality};
use crate::metrics::pr_auc;
use crate::nn::{gradient_check, GradCheckConfig, TrainConfig};

fn small_spec() -> EncoderSpec {
    EncoderSpec {
        temporal_kernel: 8,
        separable_kernel: 4,
        pool1: 2,
        pool2: 2,
        dim: 6,
        temporal_filters: 2,
        separable_filters: 3,
        ..EncoderSpec::new(Modality::Eeg, 3, 16)
    }
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn default_recipe_emits_512_dims() {
    let enc = EncoderParams::init(EncoderSpec::new(Modality::Eeg, 19, 6000), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = noise(&mut rng, 19 * 6000);
    let f = enc.encode_epoch(&x).unwrap();
    assert_eq!(f.dim(), 512);
    assert_eq!(enc.encode_epoch(&x).unwrap(), f);
}

#[test]
fn zero_input_yields_dense_bias() {
    let mut enc = EncoderParams::init(small_spec(), 2).unwrap();
    let bias_id = enc.params().id("dense.bias").unwrap();
    let bias: Vec<f64> = (0..6).map(|i| i as f64 * 0.25 - 0.5).collect();
    enc.params_mut().get_mut(bias_id).data = bias.clone();
    let f = enc.encode_epoch(&vec![0.0; 3 * 16]).unwrap();
    assert_eq!(f.values(), &bias[..]);
}

#[test]
fn shape_mismatch_names_both_sides() {
    let enc = EncoderParams::init(small_spec(), 2).unwrap();
    let err = enc.encode_epoch(&[0.0; 10]).unwrap_err().to_string();
    assert!(err.contains("[3 x 16]") && err.contains("10"), "{err}");
}

#[test]
fn single_epoch_recording_equals_epoch() {
    let enc = EncoderParams::init(small_spec(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = noise(&mut rng, 48);
    let data: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let rec = RecordingInput::new(Modality::Eeg, 3, 16, 1, None, data.clone()).unwrap();
    let as_f64: Vec<f64> = data.iter().map(|&v| v as f64).collect();
    assert_eq!(enc.encode_recording(&rec).unwrap(), enc.encode_epoch(&as_f64).unwrap());
}

#[test]
fn epoch_order_does_not_matter() {
    let enc = EncoderParams::init(small_spec(), 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let epochs: Vec<Vec<f32>> = (0..3).map(|_| noise(&mut rng, 48).iter().map(|&v| v as f32).collect()).collect();
    let build = |order: &[usize]| {
        let data = order.iter().flat_map(|&i| epochs[i].clone()).collect();
        RecordingInput::new(Modality::Eeg, 3, 16, 3, Some(100), data).unwrap()
    };
    let a = enc.encode_recording(&build(&[0, 1, 2])).unwrap();
    let b = enc.encode_recording(&build(&[2, 0, 1])).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn opposite_epochs_cancel_in_the_linear_regime() {
    // A large shift after the second normalization keeps every ReLU open,
    // so the network is affine; subtracting its offset makes it linear.
    let mut enc = EncoderParams::init(small_spec(), 8).unwrap();
    let beta = enc.params().id("bn2.beta").unwrap();
    enc.params_mut().get_mut(beta).data.iter_mut().for_each(|b| *b = 50.0);
    let beta = enc.params().id("bn3.beta").unwrap();
    enc.params_mut().get_mut(beta).data.iter_mut().for_each(|b| *b = 500.0);
    let offset = enc.encode_epoch(&vec![0.0; 48]).unwrap();
    let bias = enc.params().id("dense.bias").unwrap();
    for (b, o) in enc.params_mut().get_mut(bias).data.iter_mut().zip(offset.values()) {
        *b -= o;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f32> = (0..48).map(|_| rng.gen_range(-0.5f32..0.5)).collect();
    let data = x.iter().copied().chain(x.iter().map(|v| -v)).collect();
    let rec = RecordingInput::new(Modality::Eeg, 3, 16, 2, None, data).unwrap();
    let v = enc.encode_epoch(&x.iter().map(|&a| a as f64).collect::<Vec<_>>()).unwrap();
    assert!(v.values().iter().any(|a| a.abs() > 1e-3));
    let f = enc.encode_recording(&rec).unwrap();
    assert!(f.values().iter().all(|a| a.abs() < 1e-9), "{:?}", f.values());
}

#[test]
fn dropout_only_in_training() {
    let enc = EncoderParams::init(small_spec(), 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = noise(&mut rng, 48);
    let target = vec![0.0; 6];
    let (plain, _) = enc.loss(enc.params(), &x, &target, None).unwrap();
    let (again, _) = enc.loss(enc.params(), &x, &target, None).unwrap();
    assert_eq!(plain, again);
    let mut drng = ChaCha8Rng::seed_from_u64(12);
    let (dropped, _) = enc.loss(enc.params(), &x, &target, Some(&mut drng)).unwrap();
    assert_ne!(plain, dropped);
}

#[test]
fn calibration_standardizes_first_layer() {
    let mut enc = EncoderParams::init(small_spec(), 13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let epochs: Vec<Vec<f64>> = (0..4).map(|_| noise(&mut rng, 48).iter().map(|v| 3.0 * v + 2.0).collect()).collect();
    enc.calibrate(&epochs).unwrap();
    let mean = enc.params().id("bn1.mean").unwrap();
    let var = enc.params().id("bn1.var").unwrap();
    assert!(enc.params().data(mean).iter().all(|m| m.abs() > 1e-3));
    assert!(enc.params().data(var).iter().all(|v| *v > 1e-3));
    assert!(enc.calibrate(&[]).is_err());
}

#[test]
fn encoder_stack_gradients_match_finite_differences() {
    let mut enc = EncoderParams::init(small_spec(), 15).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let calib: Vec<Vec<f64>> = (0..3).map(|_| noise(&mut rng, 48)).collect();
    enc.calibrate(&calib).unwrap();
    let x = noise(&mut rng, 48);
    let target = noise(&mut rng, 6);
    let report = gradient_check(enc.params(), |p| enc.loss(p, &x, &target, None), GradCheckConfig::default()).unwrap();
    assert!(report.checked >= 100);
    assert!(report.passes(1e-4), "{report:?}");
}

#[test]
fn save_load_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let enc = EncoderParams::init(small_spec(), 17).unwrap();
    let (bin, json) = (dir.path().join("e.bin"), dir.path().join("e.json"));
    enc.save(&bin, &json).unwrap();
    let back = EncoderParams::load(&bin, &json).unwrap();
    assert_eq!(back.spec(), enc.spec());
    assert_eq!(back.params(), enc.params());
}

fn clf_with_logits(logits: &[f64]) -> AnchorClassifier {
    // Three-label view: use the eeg vocabulary but pin all other labels low.
    let mut clf = AnchorClassifier::new(Modality::Eeg, 1, 0);
    let w = clf.params().id("anchor.weight").unwrap();
    let b = clf.params().id("anchor.bias").unwrap();
    let n = clf.labels().len();
    clf.params_mut().get_mut(w).data = vec![0.0; n];
    let mut bias = vec![-20.0; n];
    bias[..logits.len()].copy_from_slice(logits);
    clf.params_mut().get_mut(b).data = bias;
    clf
}

#[test]
fn saturated_logits_pick_one_label() {
    let clf = clf_with_logits(&[10.0, -10.0, -10.0]);
    let got = predict_anchor_words(&Embedding::zeros(1), &clf).unwrap();
    assert_eq!(got, vec![AnchorWord::parse(Modality::Eeg, clf.labels()[0]).unwrap()]);
}

#[test]
fn no_label_above_threshold_falls_back_to_top_one() {
    let clf = clf_with_logits(&[-10.0, -9.0, -10.0]);
    let got = clf.predict(&Embedding::zeros(1)).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].label(), clf.labels()[1]);
}

#[test]
fn predictions_are_sorted_by_probability() {
    let clf = clf_with_logits(&[1.0, 3.0, 2.0]);
    let got: Vec<String> = clf.predict(&Embedding::zeros(1)).unwrap().iter().map(|a| a.label().to_string()).collect();
    let l = clf.labels();
    assert_eq!(got, vec![l[1], l[2], l[0]]);
}

#[test]
fn anchor_classifier_gradients_are_exact() {
    let clf = AnchorClassifier::new(Modality::Xray, 12, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = noise(&mut rng, 12);
    let t: Vec<f64> = (0..13).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let report = gradient_check(clf.params(), |p| clf.loss(p, &f, &t), GradCheckConfig::default()).unwrap();
    assert!(report.passes(1e-6), "{report:?}");
}

fn eeg_labels(names: &[&str]) -> Vec<AnchorWord> {
    names.iter().map(|n| AnchorWord::parse(Modality::Eeg, n).unwrap()).collect()
}

#[test]
fn repeated_example_is_memorized() {
    let f = Embedding::new(vec![0.3, -0.2, 0.7, 0.1]).unwrap();
    let pairs = vec![(f, eeg_labels(&["Sleep", "Seizure"]))];
    let config = TrainConfig {
        epochs: 200,
        adam: crate::nn::AdamConfig { lr: 0.1, ..Default::default() },
        ..Default::default()
    };
    let clf = train_anchor_classifier(Modality::Eeg, &pairs, &config).unwrap();
    assert!(clf.final_loss().unwrap() < 0.01, "{:?}", clf.final_loss());
}

#[test]
fn training_is_deterministic_and_zero_lr_is_inert() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let pairs: Vec<_> = (0..20)
        .map(|i| {
            (
                Embedding::new(noise(&mut rng, 5)).unwrap(),
                eeg_labels(if i % 2 == 0 { &["Normality"] } else { &["Seizure"] }),
            )
        })
        .collect();
    let config = TrainConfig { epochs: 5, batch_size: 4, seed: 9, ..Default::default() };
    let a = train_anchor_classifier(Modality::Eeg, &pairs, &config).unwrap();
    let b = train_anchor_classifier(Modality::Eeg, &pairs, &config).unwrap();
    assert_eq!(a.params(), b.params());
    let frozen = TrainConfig {
        adam: crate::nn::AdamConfig { lr: 0.0, ..Default::default() },
        ..config
    };
    let c = train_anchor_classifier(Modality::Eeg, &pairs, &frozen).unwrap();
    assert_eq!(c.params(), AnchorClassifier::new(Modality::Eeg, 5, 9).params());
}

#[test]
fn separable_embeddings_reach_high_pr_auc() {
    // Each label owns one embedding coordinate; positives sit at +1, negatives at -1.
    let labels = Modality::Xray.anchor_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut pairs = Vec::new();
    for _ in 0..200 {
        let mut f = vec![0.0; labels.len()];
        let mut on = Vec::new();
        for (i, name) in labels.iter().enumerate() {
            let pos = rng.gen_bool(0.3);
            f[i] = if pos { 1.0 } else { -1.0 } + rng.gen_range(-0.3..0.3);
            if pos {
                on.push(AnchorWord::parse(Modality::Xray, name).unwrap());
            }
        }
        pairs.push((Embedding::new(f).unwrap(), on));
    }
    let config = TrainConfig {
        epochs: 60,
        batch_size: 32,
        adam: crate::nn::AdamConfig { lr: 0.05, ..Default::default() },
        ..Default::default()
    };
    let clf = train_anchor_classifier(Modality::Xray, &pairs, &config).unwrap();
    for (j, _) in labels.iter().enumerate() {
        let scores: Vec<f64> = pairs.iter().map(|(f, _)| clf.probabilities(f).unwrap()[j]).collect();
        let truth: Vec<bool> = pairs.iter().map(|(_, on)| on.iter().any(|a| a.index(Modality::Xray) == Some(j))).collect();
        let auc = pr_auc(&scores, &truth).unwrap();
        assert!(auc >= 0.95, "label {j}: {auc}");
    }
}

#[test]
fn anchor_classifier_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut clf = AnchorClassifier::new(Modality::Eeg, 4, 1);
    clf.set_thresholds(vec![0.4; 9]).unwrap();
    let (bin, json) = (dir.path().join("a.bin"), dir.path().join("a.json"));
    clf.save(&bin, &json).unwrap();
    let back = AnchorClassifier::load(&bin, &json).unwrap();
    assert_eq!(back.params(), clf.params());
    assert_eq!(back.thresholds(), clf.thresholds());
    assert!(clf.set_thresholds(vec![1.0; 9]).is_err());
}
