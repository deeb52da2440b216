//! Low-dimensional embeddings of the rows of `Q̄`.

mod pca;
mod random_projection;
mod tsne;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use pca::{pca_project, PcaFit};
pub use random_projection::{sparse_projection_matrix, sparse_random_project};
pub use tsne::{
    kl_divergence, kl_gradient, tsne_affinities, tsne_project, Affinities, PreReduce, TsneConfig, TsneRun, ENTROPY_TOL,
    MAX_BISECTION_STEPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMethod {
    RandomProjection,
    Pca,
    Tsne,
}

impl std::fmt::Display for EmbedMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmbedMethod::RandomProjection => "random_projection",
            EmbedMethod::Pca => "pca",
            EmbedMethod::Tsne => "tsne",
        })
    }
}

/// Method-specific diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbedMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explained_variance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_kl: Option<f64>,
    /// `(iteration, KL)` checkpoints.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kl_history: Vec<(usize, f64)>,
    /// Dimension of the PCA pre-reduction applied before t-SNE, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_reduced_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// One row per word.
    pub coords: Array2<f64>,
    pub method: EmbedMethod,
    pub seed: u64,
    pub meta: EmbedMeta,
}

impl Embedding {
    pub fn new(coords: Array2<f64>, method: EmbedMethod, seed: u64, meta: EmbedMeta) -> Result<Self> {
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("embedding contains non-finite coordinates"));
        }
        Ok(Embedding {
            coords,
            method,
            seed,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }
}
