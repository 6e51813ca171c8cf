//! Batch toolkit for block-backtranslation NMT pipelines.
//!
//! The crate covers the algorithmic core of a training-and-decoding pipeline
//! that alternates authentic and synthetic parallel data in contiguous blocks:
//!
//! - [`corpus`] — parallel corpora, Moses-style n-best lists, and
//!   named-entity test sets, with strict line-oriented loaders.
//! - [`metrics`] — chrF, smoothed sentence BLEU, corpus BLEU, named-entity
//!   translation accuracy, and an external-score file reader; chrF and
//!   sentence BLEU double as MBR utility functions.
//! - [`schedule`] — compiles block/mixed training schedules into update-range
//!   manifests with checkpoint tagging, and turns them into deterministic
//!   seeded batch streams.
//! - [`params`] — parameter snapshots with per-update exponential smoothing
//!   and consecutive-k checkpoint averaging.
//! - [`mbr`] — consensus reranking over multi-checkpoint hypothesis pools and
//!   exhaustive checkpoint-combination search.
//! - [`toytrain`] — a desk-scale SGD trainer on synthetic multi-domain data
//!   that reproduces the block-oscillation-and-averaging phenomenology.
//! - [`cli`] — the `blockbt` command-line entry point wiring it all together.
//!
//! Every operation is deterministic given its inputs and seed. See the
//! runnable programs under `examples/` for each capability.

pub mod cli;
pub mod corpus;
mod error;
pub mod mbr;
pub mod metrics;
pub mod params;
pub mod schedule;
pub mod toytrain;

pub use error::{Error, Result};
