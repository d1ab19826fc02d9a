use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AnchorSource, GenerationConfig};
use super::generate::{generate_report, GeneratedReport};
use super::split::Split;
use super::system::{RecordingSource, System};
use crate::corpus::{join_tokens, tokenize, Report};
use crate::encoder::Embedding;
use crate::metrics::{evaluate_records, EvalRecord, EvalReport};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metrics: EvalReport,
    pub records: Vec<EvalRecord>,
    pub generated: Vec<GeneratedReport>,
}

/// Generates for each report (gold anchors as the user anchors) and
/// pairs the result with the gold section text.
pub fn generate_records(
    system: &System,
    reports: &[Report],
    embeddings: &[Embedding],
    config: &GenerationConfig,
) -> Result<(Vec<EvalRecord>, Vec<GeneratedReport>)> {
    if reports.len() != embeddings.len() {
        return Err(Error::shape("embeddings", reports.len(), embeddings.len()));
    }
    let section = system.section();
    let generated: Vec<GeneratedReport> = reports
        .par_iter()
        .zip(embeddings)
        .map(|(r, f)| {
            let prefixes = config.gold_prefix.then(|| gold_prefixes(r, section, config.prefix_len));
            let anchors = match config.anchors_source {
                AnchorSource::User => Some(r.anchors.as_slice()),
                AnchorSource::Predicted => None,
            };
            generate_report(system, f, anchors, prefixes.as_deref(), config)
        })
        .collect::<Result<_>>()?;
    let records = reports
        .iter()
        .zip(&generated)
        .map(|(r, g)| EvalRecord {
            id: r.id.clone(),
            candidate: g.text(),
            references: vec![r.section_text(section).to_string()],
            gold_anchors: r.anchors.iter().map(|a| a.label().to_string()).collect(),
        })
        .collect();
    Ok((records, generated))
}

/// First `n` tokens of every gold sentence.
pub fn gold_prefixes(report: &Report, section: Option<&str>, n: usize) -> Vec<String> {
    report
        .sentences(section)
        .iter()
        .map(|s| join_tokens(&tokenize(s).into_iter().take(n).collect::<Vec<_>>()))
        .collect()
}

/// Scores generation on already-embedded reports.
pub fn evaluate_reports(
    system: &System,
    reports: &[Report],
    embeddings: &[Embedding],
    config: &GenerationConfig,
) -> Result<Evaluation> {
    let (records, generated) = generate_records(system, reports, embeddings, config)?;
    let metrics = evaluate_records(&records, system.phenotype())?;
    Ok(Evaluation { metrics, records, generated })
}

/// Checks the split is patient-disjoint, then generates for and scores
/// every test report.
pub fn evaluate_split(
    system: &System,
    split: &Split,
    config: &GenerationConfig,
    source: &RecordingSource,
) -> Result<Evaluation> {
    split.check()?;
    if split.test.is_empty() {
        return Err(Error::Invalid("test split is empty".into()));
    }
    let embeddings = system.embed_reports(&split.test, source)?;
    evaluate_reports(system, &split.test, &embeddings, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub anchor_count: usize,
    pub cider: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
}

/// For each count `c`, truncates every report's gold anchors to the
/// first `c` and evaluates generation from them.
pub fn anchor_sweep(
    system: &System,
    reports: &[Report],
    embeddings: &[Embedding],
    counts: &[usize],
    config: &GenerationConfig,
) -> Result<Vec<SweepRow>> {
    if let Some(c) = counts.iter().find(|c| !(1..=5).contains(*c)) {
        return Err(Error::Invalid(format!("anchor count {c} outside 1..=5")));
    }
    let config = GenerationConfig {
        anchors_source: AnchorSource::User,
        ..config.clone()
    };
    counts
        .iter()
        .map(|&c| {
            let truncated: Vec<Report> = reports
                .iter()
                .map(|r| Report {
                    anchors: r.anchors.iter().take(c).cloned().collect(),
                    ..r.clone()
                })
                .collect();
            let (records, _) = generate_records(system, &truncated, embeddings, &config)?;
            let m = evaluate_records(&records, None)?;
            Ok(SweepRow {
                anchor_count: c,
                cider: m.cider,
                bleu1: m.bleu1,
                bleu2: m.bleu2,
                bleu3: m.bleu3,
                bleu4: m.bleu4,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub seed: u64,
    pub config_hash: String,
    pub prefix_len: Option<usize>,
    pub spearman_cider: Option<f64>,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: &str = "anchor_count,cider,bleu1,bleu2,bleu3,bleu4";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.anchor_count, r.cider, r.bleu1, r.bleu2, r.bleu3, r.bleu4
        ));
    }
    out
}

/// Writes the CSV table to `path` and the metadata next to it with a
/// `.json` extension.
pub fn write_sweep(path: &Path, rows: &[SweepRow], system: &System) -> Result<SweepMeta> {
    let xs: Vec<f64> = rows.iter().map(|r| r.anchor_count as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.cider).collect();
    let gen = &system.config().generation;
    let meta = SweepMeta {
        seed: system.config().seed,
        config_hash: system.config().hash(),
        prefix_len: gen.gold_prefix.then_some(gen.prefix_len),
        spearman_cider: spearman(&xs, &ys),
        rows: rows.to_vec(),
    };
    std::fs::write(path, sweep_csv(rows)).map_err(|e| Error::io(path, e))?;
    let side = path.with_extension("json");
    std::fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&side, e))?;
    Ok(meta)
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either side is constant or there are fewer than two points.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}
