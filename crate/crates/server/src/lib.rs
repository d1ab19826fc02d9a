//! HTTP session service and command-line front end.
//!
//! The service keeps composition sessions in memory. `suggest` previews
//! the next sentence without touching the session; `accept` and
//! `finalize` are the only mutations and carry an optional revision for
//! optimistic concurrency.

pub mod api;
pub mod cli;

pub use api::{router, serve, AppState};
