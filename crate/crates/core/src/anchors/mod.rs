//! Anchor-word selection.

mod greedy;
pub mod hull;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::linalg::squared_distance;
use crate::{Error, Result};

pub use greedy::{greedy_anchors, RESIDUAL_FLOOR};
pub use hull::{convex_hull, exact_hull_anchors, ConvexHull, HULL_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMethod {
    Greedy,
    HullPca,
    HullTsne,
}

impl std::fmt::Display for AnchorMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnchorMethod::Greedy => "greedy",
            AnchorMethod::HullPca => "hull_pca",
            AnchorMethod::HullTsne => "hull_tsne",
        })
    }
}

/// Ordered anchor words. Prefixes of the list are the anchors of smaller models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub word_ids: Vec<usize>,
    pub method: AnchorMethod,
    /// Residual norm at selection time (greedy) or distance from the candidate
    /// centroid (hull), parallel to `word_ids`.
    pub scores: Vec<f64>,
    pub hull_dim: Option<usize>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    /// The first `k` anchors.
    pub fn truncate(&self, k: usize) -> Result<AnchorSet> {
        if k > self.len() {
            return Err(Error::KTooLarge {
                requested: k,
                available: self.len(),
            });
        }
        Ok(AnchorSet {
            word_ids: self.word_ids[..k].to_vec(),
            method: self.method,
            scores: self.scores[..k].to_vec(),
            hull_dim: self.hull_dim,
        })
    }
}

pub fn truncate(anchor_set: &AnchorSet, k: usize) -> Result<AnchorSet> {
    anchor_set.truncate(k)
}

/// Centroid of the candidate rows of `points`.
pub(crate) fn candidate_centroid(points: ArrayView2<f64>, candidates: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; points.ncols()];
    for &i in candidates {
        for (cj, &x) in c.iter_mut().zip(points.row(i).iter()) {
            *cj += x;
        }
    }
    let n = candidates.len().max(1) as f64;
    c.iter_mut().for_each(|x| *x /= n);
    c
}

/// Sorts `vertices` by descending Euclidean distance from the centroid of the
/// `candidates` rows of `points`; equal distances keep the smaller word id first.
pub fn order_anchors(
    vertices: &[usize],
    points: ArrayView2<f64>,
    candidates: &[usize],
    method: AnchorMethod,
) -> Result<AnchorSet> {
    if vertices.is_empty() {
        return Err(Error::invalid("no vertices to order"));
    }
    let centroid = ndarray::Array1::from(candidate_centroid(points, candidates));
    let mut scored: Vec<(usize, f64)> = vertices
        .iter()
        .map(|&w| (w, squared_distance(points.row(w), centroid.view()).sqrt()))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(AnchorSet {
        word_ids: scored.iter().map(|s| s.0).collect(),
        scores: scored.iter().map(|s| s.1).collect(),
        method,
        hull_dim: Some(points.ncols()),
    })
}

/// Word ids whose mask entry is set.
pub fn candidates_from_mask(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}
