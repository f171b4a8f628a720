//! Localization-map enhancement and evaluation.
//!
//! * [`sem`]: seed-similarity enhancement of first-stage maps.
//! * [`direct_eval`], [`box_eval`]: pixel-level and box-level metrics.
//! * [`boundary`], [`hns`], [`edge_eval`]: pseudo-boundary generation,
//!   the boundary loss, and edge benchmarking.
//! * [`io`]: `.npy`, PNG, manifest and report formats.

pub mod boundary;
pub mod box_eval;
pub mod direct_eval;
pub mod edge_eval;
pub mod error;
pub mod filter;
pub mod fixtures;
pub mod grid;
pub mod hns;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod sem;

pub use error::{Error, Result};
