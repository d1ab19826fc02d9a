//! Interactive clinical report auto-completion.
//!
//! Reports are written one sentence at a time. Each sentence starts as a
//! template retrieved from an index of previously written sentences and is
//! then rewritten by a sequence-to-sequence editor conditioned on an
//! embedding of the input recording and on the context of the sentences
//! already accepted.
//!
//! The crate is organized bottom-up:
//!
//! * [`corpus`]: reports, tokenization, vocabulary, synthetic corpora.
//! * [`prototype`]: the weighted prototype-sentence repository and its
//!   inverted index.
//! * [`nn`]: a small reverse-mode autodiff tape, Adam, finite-difference
//!   checks and the tensor file format shared by all models.
//! * [`encoder`]: recordings, the convolutional input encoder and the
//!   anchor-word classifier.
//! * [`editor`]: the seq2seq sentence editor.
//! * [`metrics`]: BLEU, CIDEr and the phenotype-prediction protocol.
//! * [`pipeline`]: end-to-end generation, evaluation and anchor sweeps.

pub mod corpus;
pub mod editor;
pub mod encoder;
mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod prototype;

pub use error::{Error, Result};
