//! Text-generation metrics (BLEU, CIDEr), precision-recall area and the
//! phenotype evaluation built on a character-level classifier.

mod bleu;
mod cider;
mod eval;
mod ngram;
mod phenotype;
mod pr;
#[cfg(test)]
mod tests;

pub use bleu::{bleu, bleu_with, clipped_precision, BleuMode};
pub use cider::{cider, cider_with_idf, CiderIdf};
pub use eval::{evaluate_records, read_eval_records, EvalRecord, EvalReport};
pub use ngram::{EvalPair, NGramCounts, MAX_ORDER};
pub use phenotype::{
    encode_text, phenotype_eval, train_phenotype_classifier, PhenotypeClassifier, PhenotypeConfig,
    PhenotypeScores, ALPHABET,
};
pub use pr::{averaged_accuracy, mean_pr_auc, pr_auc};
