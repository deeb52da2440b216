//! Anchor-word topic inference.
//!
//! Anchors are chosen either greedily in a high-dimensional random projection
//! of the row-normalized word co-occurrence matrix, or as the exact vertices of
//! the convex hull of a 2-/3-dimensional PCA or t-SNE embedding of the same
//! rows. Topics are recovered by simplex-constrained least squares and scored
//! with a suite of topic-quality metrics.
//!
//! The stages map onto modules:
//!
//! * [`corpus`]: tokenization, vocabulary curation, held-out split
//! * [`cooccur`]: the word-word co-occurrence estimate and its row normalization
//! * [`embed`]: sparse random projection, PCA and exact t-SNE
//! * [`anchors`]: greedy Gram-Schmidt anchors and Quickhull anchors
//! * [`recover`]: exponentiated-gradient coefficient solves and Bayes inversion
//! * [`metrics`]: recovery error, entropy, specificity, dissimilarity,
//!   coherence, anchor ranks and left-to-right held-out likelihood
//! * [`pipeline`]: artifact caching, K sweeps, stability runs, plot export

// `!(x > 0.0)` also rejects NaN; index loops read better for dense matrix code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anchors;
pub mod cooccur;
pub mod corpus;
pub mod embed;
mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod recover;
pub mod toy;

pub use anchors::{AnchorMethod, AnchorSet};
pub use cooccur::CooccurrenceStats;
pub use corpus::{CorpusSplit, CurationConfig, Document, Vocabulary};
pub use embed::{EmbedMethod, Embedding, TsneConfig};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use recover::{SolverConfig, TopicModel};
