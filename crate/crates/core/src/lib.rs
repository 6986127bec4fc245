//! Evaluation toolkit for multi-document summarization of medical literature
//! reviews.
//!
//! The crate is organised around the evaluation pipeline:
//!
//! * [`corpus`] loads reviews, generated summaries and externally produced
//!   model outputs ("sidecars"), and owns the append-only annotation log.
//! * [`lexical`] holds tokenization, the ROUGE family, self-repetition
//!   profiling and the input-copying analysis.
//! * [`modelmetrics`] scores summaries from sidecar outputs: PIO-Overlap,
//!   Delta-EI, embedding cosine metrics and BERTScore-F.
//! * [`humaneval`] defines the facet and pairwise annotation protocols,
//!   facet normalization and inter-annotator agreement.
//! * [`ranking`] aggregates instance-level values into system rankings,
//!   combines annotator rankings with a Borda count, bootstraps ranking
//!   stability and computes correlations and ECDFs.
//! * [`campaign`] samples annotation assignments.
//!
//! Neural inference is never run here; every model output is read from a
//! sidecar file keyed by [`corpus::TextKey`].

pub mod campaign;
pub mod corpus;
pub mod humaneval;
pub mod lexical;
pub mod modelmetrics;
pub mod ranking;

mod jsonl;

pub use corpus::{Corpus, MetricId, MetricRecord, Origin, SidecarBundle, TextKey};
