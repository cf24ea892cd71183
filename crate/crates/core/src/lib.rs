//! Layout-aware resume parsing.
//!
//! The crate turns positioned text primitives into structured resume
//! records and scores them against ground truth:
//!
//! * [`ingest`] fuses embedded-text and OCR primitives.
//! * [`layout`] segments pages and produces an [`IndexedDocument`].
//! * [`extract`] runs three concurrent prompt tasks against a completion backend.
//! * [`refine`] grounds, normalizes, deduplicates and verifies the result.
//! * [`eval`] aligns entities and computes precision, recall, F1 and accuracy.
//! * [`synth`] generates deterministic fixtures for testing.
//! * [`pipeline`] runs the stages end to end over a corpus.

pub mod doc_model;
pub mod eval;
pub mod extract;
pub mod ingest;
pub mod layout;
pub mod pipeline;
pub mod refine;
pub mod synth;
pub mod text;

pub use doc_model::{BoundingBox, IndexedDocument, IndexedLine, LayoutSegment, LineRange, Source, TextPrimitive};
pub use extract::{DecodeConfig, ResumeRecord};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/reading-order.md")]
    pub struct ReadingOrder;
    #[doc = include_str!("../../../book/src/pointers.md")]
    pub struct Pointers;
    #[doc = include_str!("../../../book/src/refinement.md")]
    pub struct Refinement;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/fixtures.md")]
    pub struct Fixtures;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
