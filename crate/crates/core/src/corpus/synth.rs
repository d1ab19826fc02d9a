//! Deterministic synthetic corpora.
//!
//! Every report sentence is rendered from a template family keyed to one
//! anchor word, with slots (laterality, severity, morphology...) filled at
//! random. [`synth_recording`] renders a matching recording from the
//! report text, so embeddings of the recording carry the slot values the
//! editor has to recover.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{tokenize, AnchorWord, Modality, Report};
use crate::encoder::RecordingInput;

struct Family {
    anchor: &'static str,
    variants: &'static [(&'static str, f64)],
}

const EEG_FAMILIES: &[Family] = &[
    Family {
        anchor: "Normality",
        variants: &[
            ("normality of the background with a {hz} hz posterior dominant rhythm .", 0.6),
            ("normality of the background with no epileptiform discharges .", 0.4),
        ],
    },
    Family {
        anchor: "Sleep",
        variants: &[("stage {stage} sleep is recorded .", 1.0)],
    },
    Family {
        anchor: "Generalized Slowing",
        variants: &[("generalized slowing of the background is {severity} .", 1.0)],
    },
    Family {
        anchor: "Focal Slowing",
        variants: &[("focal slowing is seen over the {loc} region .", 1.0)],
    },
    Family {
        anchor: "Epileptiform Discharges",
        variants: &[(
            "epileptiform discharges with {morph} morphology are seen over the {loc} region .",
            1.0,
        )],
    },
    Family {
        anchor: "Drowsiness",
        variants: &[("drowsiness is seen with {drowsy} .", 1.0)],
    },
    Family {
        anchor: "Spindles",
        variants: &[("{sym} spindles are present over the central regions .", 1.0)],
    },
    Family {
        anchor: "Vertex Waves",
        variants: &[("{vertex} vertex waves are seen centrally .", 1.0)],
    },
    Family {
        anchor: "Seizure",
        variants: &[("a {duration} seizure arises from the {loc} region .", 1.0)],
    },
];

const XRAY_FAMILIES: &[Family] = &[
    Family {
        anchor: "No Finding",
        variants: &[
            ("no finding of acute cardiopulmonary disease .", 0.6),
            ("no finding of pleural effusion or pneumothorax .", 0.4),
        ],
    },
    Family {
        anchor: "Enlarged Cardiomediastinum",
        variants: &[("the cardiomediastinum is enlarged with {widening} widening .", 1.0)],
    },
    Family {
        anchor: "Cardiomegaly",
        variants: &[("{heart} cardiomegaly is present .", 1.0)],
    },
    Family {
        anchor: "Lung Lesion",
        variants: &[("a {size} lung lesion is seen in the {side} {lobe} lobe .", 1.0)],
    },
    Family {
        anchor: "Airspace Opacity",
        variants: &[("airspace opacity is noted in the {side} {lobe} lobe .", 1.0)],
    },
    Family {
        anchor: "Edema",
        variants: &[("{edema} pulmonary edema is present .", 1.0)],
    },
    Family {
        anchor: "Consolidation",
        variants: &[("consolidation is seen in the {side} {lobe} lobe .", 1.0)],
    },
    Family {
        anchor: "Pneumonia",
        variants: &[("findings suggest {side} lower lobe pneumonia .", 1.0)],
    },
    Family {
        anchor: "Atelectasis",
        variants: &[("{side} basilar atelectasis is noted .", 1.0)],
    },
    Family {
        anchor: "Pneumothorax",
        variants: &[("there is a {size} {side} pneumothorax .", 1.0)],
    },
    Family {
        anchor: "Pleural Effusion",
        variants: &[("there is a {size} {side} pleural effusion .", 1.0)],
    },
    Family {
        anchor: "Pleural Other",
        variants: &[("other pleural abnormality with {side} pleural thickening .", 1.0)],
    },
    Family {
        anchor: "Fracture",
        variants: &[("a healed {side} rib fracture is seen .", 1.0)],
    },
];

fn slot_options(name: &str) -> &'static [&'static str] {
    match name {
        "hz" => &["8", "9", "10", "11"],
        "stage" => &["two", "three"],
        "severity" => &["mild", "moderate", "marked"],
        "loc" => &["left temporal", "right temporal", "left frontal", "right frontal"],
        "morph" => &["spike", "sharp wave"],
        "drowsy" => &["slow roving eye movements", "attenuation of the alpha rhythm"],
        "sym" => &["symmetric", "asymmetric"],
        "vertex" => &["sharp", "blunt"],
        "duration" => &["brief", "prolonged"],
        "widening" => &["mild", "marked"],
        "heart" => &["mild", "moderate", "severe"],
        "size" => &["small", "large"],
        "side" => &["left", "right"],
        "lobe" => &["upper", "lower"],
        "edema" => &["mild", "moderate"],
        other => panic!("unknown slot {other}"),
    }
}

fn families(modality: Modality) -> &'static [Family] {
    match modality {
        Modality::Eeg => EEG_FAMILIES,
        Modality::Xray => XRAY_FAMILIES,
    }
}

enum Piece {
    Word(&'static str),
    Slot(&'static str),
}

fn pieces(template: &'static str) -> impl Iterator<Item = Piece> {
    template.split(' ').map(|w| {
        match w.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
            Some(slot) => Piece::Slot(slot),
            None => Piece::Word(w),
        }
    })
}

fn render(template: &'static str, rng: &mut ChaCha8Rng) -> String {
    let words: Vec<&str> = pieces(template)
        .map(|p| match p {
            Piece::Word(w) => w,
            Piece::Slot(s) => slot_options(s).choose(rng).copied().unwrap(),
        })
        .collect();
    super::vocab::join_tokens(&words)
}

/// A report sentence recognized as an instance of a template family.
#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub anchor: &'static str,
    pub variant: usize,
    pub slots: BTreeMap<&'static str, &'static str>,
}

impl Finding {
    fn slot(&self, name: &str) -> &'static str {
        self.slots.get(name).copied().unwrap_or("")
    }
}

/// Recognizes `sentence` as an instance of one of the modality's
/// families.
pub fn parse_finding(modality: Modality, sentence: &str) -> Option<Finding> {
    let tokens = tokenize(sentence);
    for family in families(modality) {
        for (variant, (template, _)) in family.variants.iter().enumerate() {
            let mut slots = BTreeMap::new();
            if match_pieces(&pieces(*template).collect::<Vec<_>>(), &tokens, &mut slots) {
                return Some(Finding {
                    anchor: family.anchor,
                    variant,
                    slots,
                });
            }
        }
    }
    None
}

fn match_pieces(
    pattern: &[Piece],
    tokens: &[String],
    slots: &mut BTreeMap<&'static str, &'static str>,
) -> bool {
    let Some((first, rest)) = pattern.split_first() else {
        return tokens.is_empty();
    };
    match first {
        Piece::Word(w) => tokens.first().is_some_and(|t| t == w) && match_pieces(rest, &tokens[1..], slots),
        Piece::Slot(name) => {
            for option in slot_options(name) {
                let words: Vec<&str> = option.split(' ').collect();
                if tokens.len() >= words.len()
                    && tokens.iter().zip(&words).all(|(t, w)| t == w)
                    && match_pieces(rest, &tokens[words.len()..], slots)
                {
                    slots.insert(name, option);
                    return true;
                }
            }
            false
        }
    }
}

fn pick_variant(family: &Family, rng: &mut ChaCha8Rng) -> &'static str {
    let total: f64 = family.variants.iter().map(|v| v.1).sum();
    let mut x = rng.gen::<f64>() * total;
    for (template, p) in family.variants {
        if x < *p {
            return template;
        }
        x -= p;
    }
    family.variants.last().unwrap().0
}

fn family(modality: Modality, anchor: &str) -> &'static Family {
    families(modality)
        .iter()
        .find(|f| f.anchor == anchor)
        .expect("anchor has a template family")
}

fn choose_anchors(modality: Modality, rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let mut anchors = Vec::new();
    match modality {
        Modality::Eeg => {
            let mut states = vec!["Sleep", "Drowsiness", "Spindles", "Vertex Waves"];
            states.shuffle(rng);
            if rng.gen_bool(0.4) {
                anchors.push("Normality");
                anchors.extend(states.into_iter().filter(|_| rng.gen_bool(0.5)));
            } else {
                let mut findings = vec![
                    "Generalized Slowing",
                    "Focal Slowing",
                    "Epileptiform Discharges",
                    "Seizure",
                ];
                findings.shuffle(rng);
                let k = rng.gen_range(1..=2);
                anchors.extend(&findings[..k]);
                anchors.extend(states.into_iter().filter(|_| rng.gen_bool(0.4)));
            }
        }
        Modality::Xray => {
            if rng.gen_bool(0.35) {
                anchors.push("No Finding");
            } else {
                let mut findings: Vec<&str> = XRAY_ANCHORS_ABNORMAL.to_vec();
                findings.shuffle(rng);
                let k = rng.gen_range(1..=4);
                anchors.extend(&findings[..k]);
            }
        }
    }
    anchors.truncate(5);
    anchors
}

const XRAY_ANCHORS_ABNORMAL: &[&str] = &[
    "Enlarged Cardiomediastinum",
    "Cardiomegaly",
    "Lung Lesion",
    "Airspace Opacity",
    "Edema",
    "Consolidation",
    "Pneumonia",
    "Atelectasis",
    "Pneumothorax",
    "Pleural Effusion",
    "Pleural Other",
    "Fracture",
];

/// Generates `n_reports` reports, one sentence per anchor in gold order.
/// Patients contribute one to three reports each; ids are
/// `<modality>-p<patient>:<visit>`.
pub fn synth_corpus(seed: u64, n_reports: usize, modality: Modality) -> Vec<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de ^ modality.code() as u64);
    let mut reports = Vec::with_capacity(n_reports);
    let mut patient = 0usize;
    while reports.len() < n_reports {
        let visits = rng.gen_range(1..=3).min(n_reports - reports.len());
        for visit in 1..=visits {
            let anchors = choose_anchors(modality, &mut rng);
            let text = anchors
                .iter()
                .map(|a| render(pick_variant(family(modality, a), &mut rng), &mut rng))
                .collect::<Vec<_>>()
                .join(" ");
            reports.push(Report {
                id: format!("{}-p{patient:05}:{visit}", modality.as_str()),
                modality,
                sections: BTreeMap::from([(modality.default_section().to_string(), text)]),
                anchors: anchors
                    .iter()
                    .map(|a| AnchorWord::parse(modality, a).expect("known anchor"))
                    .collect(),
                signal_ref: None,
            });
        }
        patient += 1;
    }
    reports
}

pub const EEG_CHANNELS: usize = 8;
pub const EEG_SAMPLE_RATE: u32 = 32;
pub const EEG_EPOCHS: usize = 2;
pub const XRAY_ROWS: usize = 16;
pub const XRAY_COLS: usize = 128;

/// Shape `(channels, samples)` of one synthetic epoch.
pub fn synth_input_shape(modality: Modality) -> (usize, usize) {
    match modality {
        Modality::Eeg => (EEG_CHANNELS, 60 * EEG_SAMPLE_RATE as usize),
        Modality::Xray => (XRAY_ROWS, XRAY_COLS),
    }
}

/// Renders a recording consistent with the findings written in `report`.
/// Deterministic in `(report.id, report text, seed)`.
pub fn synth_recording(report: &Report, seed: u64) -> RecordingInput {
    let findings: Vec<Finding> = report
        .sentences(None)
        .iter()
        .filter_map(|s| parse_finding(report.modality, s))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(report.id.as_bytes()));
    match report.modality {
        Modality::Eeg => eeg_recording(&findings, &mut rng),
        Modality::Xray => xray_recording(&findings, &mut rng),
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(1e-12);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn eeg_channel(loc: &str) -> usize {
    match loc {
        "left temporal" => 0,
        "right temporal" => 1,
        "left frontal" => 2,
        _ => 3,
    }
}

fn eeg_recording(findings: &[Finding], rng: &mut ChaCha8Rng) -> RecordingInput {
    let (c, t) = synth_input_shape(Modality::Eeg);
    let fs = EEG_SAMPLE_RATE as f64;
    let mut data = vec![0.0f32; EEG_EPOCHS * c * t];
    for e in 0..EEG_EPOCHS {
        let phase: f64 = rng.gen::<f64>() * 2.0 * PI;
        let mut signal = vec![vec![0.0f64; t]; c];
        let mut alpha_hz = 9.0;
        let mut alpha_amp = 1.0;
        for f in findings {
            if f.anchor == "Normality" {
                alpha_amp = 1.5;
                if let Ok(hz) = f.slot("hz").parse::<f64>() {
                    alpha_hz = hz;
                }
            }
            if f.anchor == "Drowsiness" && f.slot("drowsy").starts_with("attenuation") {
                alpha_amp *= 0.3;
            }
        }
        let sine = |hz: f64, i: usize| (2.0 * PI * hz * i as f64 / fs + phase).sin();
        let spikes = |i: usize, period: f64, width: f64| {
            let k = (i as f64 / (period * fs)).round() * period * fs;
            (-((i as f64 - k) / width).powi(2) / 2.0).exp()
        };
        for i in 0..t {
            for ch in [6, 7] {
                signal[ch][i] += alpha_amp * sine(alpha_hz, i);
            }
            for f in findings {
                match f.anchor {
                    "Generalized Slowing" => {
                        let amp = match f.slot("severity") {
                            "mild" => 1.0,
                            "moderate" => 2.0,
                            _ => 3.0,
                        };
                        for row in signal.iter_mut() {
                            row[i] += amp * sine(3.0, i);
                        }
                    }
                    "Focal Slowing" => signal[eeg_channel(f.slot("loc"))][i] += 3.0 * sine(2.0, i),
                    "Epileptiform Discharges" => {
                        let width = if f.slot("morph") == "spike" { 0.7 } else { 3.0 };
                        signal[eeg_channel(f.slot("loc"))][i] += 6.0 * spikes(i, 1.5, width);
                    }
                    "Seizure" => {
                        let frac = if f.slot("duration") == "brief" { 0.25 } else { 0.75 };
                        if (i as f64) < frac * t as f64 {
                            signal[eeg_channel(f.slot("loc"))][i] += 4.0 * sine(5.0, i);
                        }
                    }
                    "Sleep" => {
                        if f.slot("stage") == "three" {
                            for row in signal.iter_mut() {
                                row[i] += 4.0 * sine(1.0, i);
                            }
                        } else {
                            let burst = spikes(i, 4.0, 8.0);
                            signal[4][i] += 2.0 * burst * sine(13.0, i);
                            signal[5][i] += 2.0 * burst * sine(13.0, i);
                        }
                    }
                    "Drowsiness" => {
                        if f.slot("drowsy").starts_with("slow") {
                            signal[2][i] += 3.0 * sine(0.5, i);
                            signal[3][i] -= 3.0 * sine(0.5, i);
                        }
                        for ch in [2, 3] {
                            signal[ch][i] += sine(6.0, i);
                        }
                    }
                    "Spindles" => {
                        let burst = spikes(i, 3.0, 10.0) * sine(13.0, i);
                        signal[4][i] += 2.5 * burst;
                        if f.slot("sym") == "symmetric" {
                            signal[5][i] += 2.5 * burst;
                        }
                    }
                    "Vertex Waves" => {
                        let width = if f.slot("vertex") == "sharp" { 1.5 } else { 6.0 };
                        let wave = 4.0 * spikes(i, 3.0, width);
                        signal[4][i] += wave;
                        signal[5][i] += wave;
                    }
                    _ => {}
                }
            }
        }
        for (ch, row) in signal.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                data[(e * c + ch) * t + i] = (v + 0.3 * gaussian(rng)) as f32;
            }
        }
    }
    RecordingInput::new(Modality::Eeg, c, t, EEG_EPOCHS, Some(EEG_SAMPLE_RATE), data)
        .expect("synthetic shape is valid")
}

fn xray_recording(findings: &[Finding], rng: &mut ChaCha8Rng) -> RecordingInput {
    let (rows, cols) = (XRAY_ROWS, XRAY_COLS);
    let mut img = vec![vec![0.0f64; cols]; rows];
    let half = cols / 2;
    // lung fields with a mediastinum in the middle
    for (r, row) in img.iter_mut().enumerate() {
        for (c, px) in row.iter_mut().enumerate() {
            let dc = (c as f64 - half as f64).abs();
            *px = if dc < 8.0 { 1.0 } else { 0.2 + 0.02 * r as f64 };
        }
    }
    let side_range = |side: &str| if side == "left" { half..cols } else { 0..half };
    let lobe_range = |lobe: &str| if lobe == "upper" { 0..rows / 2 } else { rows / 2..rows };
    let blob = |img: &mut Vec<Vec<f64>>, cr: f64, cc: f64, radius: f64, amp: f64| {
        for (r, row) in img.iter_mut().enumerate() {
            for (c, px) in row.iter_mut().enumerate() {
                let d2 = ((r as f64 - cr) / 2.0).powi(2) + ((c as f64 - cc) / 4.0).powi(2);
                *px += amp * (-d2 / (2.0 * radius * radius)).exp();
            }
        }
    };
    let center = |side: &str| if side == "left" { 0.75 * cols as f64 } else { 0.25 * cols as f64 };
    let row_center = |lobe: &str| if lobe == "upper" { 4.0 } else { 11.0 };
    for f in findings {
        match f.anchor {
            "Enlarged Cardiomediastinum" => {
                let w = if f.slot("widening") == "mild" { 12.0 } else { 18.0 };
                for row in img.iter_mut().take(rows / 2) {
                    for (c, px) in row.iter_mut().enumerate() {
                        if (c as f64 - half as f64).abs() < w {
                            *px += 0.8;
                        }
                    }
                }
            }
            "Cardiomegaly" => {
                let radius = match f.slot("heart") {
                    "mild" => 2.0,
                    "moderate" => 3.0,
                    _ => 4.0,
                };
                blob(&mut img, 11.0, half as f64 + 6.0, radius, 1.5);
            }
            "Lung Lesion" => {
                let radius = if f.slot("size") == "small" { 0.8 } else { 1.8 };
                blob(&mut img, row_center(f.slot("lobe")), center(f.slot("side")), radius, 3.0);
            }
            "Airspace Opacity" | "Consolidation" | "Pneumonia" => {
                let lobe = if f.anchor == "Pneumonia" { "lower" } else { f.slot("lobe") };
                let amp = match f.anchor {
                    "Airspace Opacity" => 0.6,
                    "Consolidation" => 1.2,
                    _ => 0.9,
                };
                for r in lobe_range(lobe) {
                    for c in side_range(f.slot("side")) {
                        img[r][c] += amp * (1.0 + 0.3 * ((c as f64) * 0.7).sin());
                    }
                }
            }
            "Edema" => {
                let amp = if f.slot("edema") == "mild" { 0.4 } else { 0.9 };
                for row in img.iter_mut() {
                    for (c, px) in row.iter_mut().enumerate() {
                        *px += amp * (1.0 - (c as f64 - half as f64).abs() / half as f64);
                    }
                }
            }
            "Atelectasis" => {
                for c in side_range(f.slot("side")) {
                    img[rows - 2][c] += 2.0;
                }
            }
            "Pneumothorax" => {
                let depth = if f.slot("size") == "small" { 3 } else { 7 };
                for row in img.iter_mut().take(depth) {
                    for c in side_range(f.slot("side")) {
                        row[c] -= 0.5;
                    }
                }
            }
            "Pleural Effusion" => {
                let height = if f.slot("size") == "small" { 3 } else { 6 };
                for row in img.iter_mut().skip(rows - height) {
                    for c in side_range(f.slot("side")) {
                        row[c] += 1.5;
                    }
                }
            }
            "Pleural Other" => {
                let edge = if f.slot("side") == "left" { cols - 3 } else { 0 };
                for row in img.iter_mut() {
                    for px in &mut row[edge..edge + 3] {
                        *px += 1.5;
                    }
                }
            }
            "Fracture" => {
                let c0 = if f.slot("side") == "left" { cols - 20 } else { 12 };
                for (r, row) in img.iter_mut().enumerate().skip(3).take(6) {
                    row[c0 + r] += 2.5;
                }
            }
            _ => {}
        }
    }
    let mut data = Vec::with_capacity(rows * cols);
    for row in &img {
        for v in row {
            data.push((v + 0.05 * gaussian(rng)) as f32);
        }
    }
    RecordingInput::new(Modality::Xray, rows, cols, 1, None, data).expect("synthetic shape is valid")
}
