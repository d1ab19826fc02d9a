//! The edit phase: a bidirectional LSTM reads the retrieved template
//! together with the recording embedding and the previous sentence's
//! context, and an LSTM decoder writes the edited sentence.
//!
//! The encoder starts every layer and direction from
//! `h0 = W_f f + W_z z_prev`; its final forward and backward top-layer
//! states are projected to the new context `z`. The decoder sees `z`
//! concatenated to its input embedding at every step.

mod model;
mod train;

pub use model::{ContextVector, EditInput, Editor, EditorConfig};
pub use train::{editor_gradient_check, train_editor, train_editor_with, EditExample, EditStep};
