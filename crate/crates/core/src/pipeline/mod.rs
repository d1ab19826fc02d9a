//! End-to-end generation: resolve anchors, then for each sentence slot
//! retrieve a template and edit it, chaining the context from slot to
//! slot. Also patient-disjoint splits, batch evaluation and anchor-count
//! sweeps.

mod config;
mod evaluate;
mod generate;
mod split;
mod system;

pub use config::{AnchorSource, EditorSizes, EncoderSizes, GenerationConfig, Mode, PipelineConfig, MAX_DEFAULT_SENTENCES};
pub use evaluate::{
    anchor_sweep, evaluate_reports, evaluate_split, generate_records, gold_prefixes, spearman, sweep_csv,
    write_sweep, Evaluation, SweepMeta, SweepRow, SWEEP_HEADER,
};
pub use generate::{
    generate_report, resolve_anchors, GeneratedReport, GeneratedSentence, Provenance, SessionState, Suggestion,
};
pub use split::{check_disjoint, split_by_patient, Split};
pub use system::{RecordingSource, System};
