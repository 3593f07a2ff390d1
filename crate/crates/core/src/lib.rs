//! Count-based distributional semantic models and the tooling to evaluate and
//! compare them.
//!
//! The pipeline runs corpus → vocabulary → co-occurrence counts → association
//! weights → dense embeddings, and any embedding space (trained here or
//! imported from word2vec text files) can then be scored on intrinsic
//! benchmarks, compared with other spaces through representational similarity
//! analysis, and summarized with non-parametric statistics over a results
//! ledger.
//!
//! - [`corpus`]: plain-text and CoNLL-U readers, vocabulary, subsampling
//! - [`cooccur`]: window, dependency and document co-occurrence extraction
//! - [`reweight`]: PPMI, log-entropy, randomized truncated SVD
//! - [`randindex`]: Random Indexing with optional permutations
//! - [`vecspace`]: embedding storage, cosine queries, token pooling, I/O
//! - [`evalsuite`]: synonymy, similarity, relatedness, categorization, analogy
//! - [`rsa`]: similarity matrices, stratified sampling, RSA reports
//! - [`analysis`]: ranks, Kruskal-Wallis, Dunn, Wilcoxon, best-model reports

pub mod analysis;
pub mod cooccur;
pub mod corpus;
pub mod error;
pub mod evalsuite;
pub mod ledger;
pub mod randindex;
pub mod reweight;
pub mod rsa;
pub mod sparse;
pub mod stats;
pub mod vecspace;

mod hashing;

pub use error::{DsmError, Result};
