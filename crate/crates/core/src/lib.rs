//! Account transaction-sequence modeling for Ethereum.
//!
//! The pipeline runs in stages that mirror the module layout:
//!
//! * [`ingest`] parses Ethereum-ETL CSV exports into a validated corpus.
//! * [`seqgen`] turns the corpus into per-account transaction sequences
//!   (ordering, de-duplication, binning, masking).
//! * [`negsample`] builds the address frequency table and draws negative pools.
//! * [`model`] holds the Transformer encoder, the masked address prediction
//!   loss and its exact gradients.
//! * [`trainer`] runs pre-training and fine-tuning and handles checkpoints.
//! * [`tasks`] evaluates representations on phishing detection and
//!   de-anonymization retrieval.
//! * [`synthgen`] generates deterministic synthetic corpora.
//!
//! Batch-level work (per-sequence forward/backward, masking, evaluation) is
//! data-parallel through [`par`]; the `parallel` feature switches it between
//! rayon and a sequential fallback with identical results.

pub mod error;
pub mod ingest;
pub mod model;
pub mod negsample;
pub mod par;
pub mod rng;
pub mod seqgen;
pub mod synthgen;
pub mod tasks;
pub mod trainer;

pub use error::{Error, Result};
