//! Analysis of dictionary definition graphs: which words every definition
//! eventually leads back to, where the definitional loops are, and what the
//! loop structure says about meaning.
//!
//! The graph model is a directed graph over word senses where an edge u -> v
//! means the definition of u uses v. On top of that base sit five analyses:
//!
//! * [`coreset`]: the attracting set that definition-following converges to,
//!   estimated by sampling or computed exactly from the condensation.
//! * [`loops`]: per-edge shortest-cycle lengths, loop-length histograms, and
//!   a degree-preserving null model.
//! * [`decompose`]: splitting the core into clusters held together by short
//!   loops.
//! * [`walks`]: walk-count matrices from every node into each cluster, plus a
//!   truncated SVD that surfaces the dominant semantic themes.
//! * [`etymology`]: first-attestation statistics per cluster against a
//!   shuffled baseline.
//!
//! [`ingest`] parses the tab-separated gloss corpus, word list, and date file
//! formats; [`fixture`] generates a synthetic corpus with planted structure
//! for tests and demos.

#![forbid(unsafe_code)]

mod error;

pub mod coreset;
pub mod decompose;
pub mod etymology;
pub mod fixture;
pub mod graph;
pub mod ingest;
pub mod loops;
pub mod walks;

pub use error::{Error, Result};
