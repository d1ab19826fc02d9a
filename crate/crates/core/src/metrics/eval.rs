use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{bleu, cider, phenotype_eval, EvalPair, PhenotypeClassifier};
use crate::corpus::AnchorWord;
use crate::{Error, Result};

/// One line of an evaluation input file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
    #[serde(default)]
    pub gold_anchors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub cider: f64,
    /// Absent when no phenotype classifier was supplied.
    pub phenotype_accuracy: Option<f64>,
    pub pr_auc: Option<f64>,
}

pub fn read_eval_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn evaluate_records(records: &[EvalRecord], clf: Option<&PhenotypeClassifier>) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Invalid("no evaluation records".into()));
    }
    let mut pairs = Vec::with_capacity(records.len());
    for r in records {
        if r.references.is_empty() {
            return Err(Error::Invalid(format!("record {} has no references", r.id)));
        }
        let refs: Vec<&str> = r.references.iter().map(String::as_str).collect();
        pairs.push(EvalPair::from_text(&r.candidate, &refs));
    }
    let (phenotype_accuracy, pr_auc) = match clf {
        Some(clf) => {
            let texts: Vec<String> = records.iter().map(|r| r.candidate.clone()).collect();
            let gold = records
                .iter()
                .map(|r| r.gold_anchors.iter().map(|a| AnchorWord::parse(clf.modality(), a)).collect())
                .collect::<Result<Vec<Vec<AnchorWord>>>>()?;
            let s = phenotype_eval(&texts, &gold, clf)?;
            (Some(s.accuracy), Some(s.pr_auc))
        }
        None => (None, None),
    };
    Ok(EvalReport {
        bleu1: bleu(&pairs, 1),
        bleu2: bleu(&pairs, 2),
        bleu3: bleu(&pairs, 3),
        bleu4: bleu(&pairs, 4),
        cider: cider(&pairs),
        phenotype_accuracy,
        pr_auc,
    })
}
