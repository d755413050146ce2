//! Graded-relevance learning-to-rank toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`ranking`]: queries, passages, graded labels, ranking contexts and batch assembly.
//! - [`losses`]: list-wise and contrastive losses with analytic gradients, centred on the
//!   closed-form 2-Wasserstein distance between Gaussian fits of label and score matrices.
//! - [`encoder`]: hashed bag-of-words features, a linear dual encoder, the training loop and
//!   parameter persistence.
//! - [`metrics`]: nDCG/MRR/Recall over TREC-style qrels and runs, plus per-grade score summaries.
//! - [`io`]: the on-disk formats (context JSONL, qrels, TSV corpora, TREC runs).
//! - [`fixture`]: a deterministic synthetic dataset with planted lexical overlap per grade.

pub mod encoder;
pub mod error;
pub mod fixture;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod ranking;

pub use error::{Error, Result};
