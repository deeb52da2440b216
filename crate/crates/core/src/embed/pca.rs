use ndarray::{Array2, ArrayView2, Axis};

use super::{EmbedMeta, EmbedMethod, Embedding};
use crate::linalg::{row_mean, top_eigen_gram};
use crate::{Error, Result};

/// Seed for the subspace-iteration start block. PCA itself is deterministic;
/// the seed only fixes the (converged-away) starting basis.
const PCA_START_SEED: u64 = 0x0005_eed0_f0ca;

#[derive(Debug, Clone)]
pub struct PcaFit {
    pub coords: Array2<f64>,
    /// `m x v` principal axes, columns ordered by decreasing variance.
    pub components: Array2<f64>,
    /// Sample variance along each axis (`eigenvalue / (n - 1)`).
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaFit {
    pub fn fit(data: ArrayView2<f64>, v: usize) -> Result<Self> {
        let (n, m) = data.dim();
        if v == 0 || v > m {
            return Err(Error::invalid(format!("PCA target dimension {v} must be in 1..={m}")));
        }
        let mean = row_mean(data);
        let centered = &data - &mean.view().insert_axis(Axis(0));
        let eig = top_eigen_gram(centered.view(), v, PCA_START_SEED)?;

        let mut components = eig.vectors;
        // Sign convention: the largest-magnitude loading of each axis is positive.
        for mut col in components.columns_mut() {
            let pivot = col.iter().copied().enumerate().fold((0usize, 0.0f64), |best, (i, x)| {
                if x.abs() > best.1.abs() {
                    (i, x)
                } else {
                    best
                }
            });
            if pivot.1 < 0.0 {
                col.mapv_inplace(|x| -x);
            }
        }
        let denom = (n.max(2) - 1) as f64;
        let total_variance = centered.iter().map(|x| x * x).sum::<f64>() / denom;
        Ok(PcaFit {
            coords: centered.dot(&components),
            components,
            explained_variance: eig.values.iter().map(|l| l.max(0.0) / denom).collect(),
            total_variance,
        })
    }
}

/// Centers the rows and projects them onto the top `v` principal axes.
pub fn pca_project(data: ArrayView2<f64>, v: usize) -> Result<Embedding> {
    let fit = PcaFit::fit(data, v)?;
    Embedding::new(
        fit.coords,
        EmbedMethod::Pca,
        0,
        EmbedMeta {
            explained_variance: Some(fit.explained_variance),
            total_variance: Some(fit.total_variance),
            ..EmbedMeta::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::squared_distance;
    use ndarray::array;

    #[test]
    fn rank_one_data_keeps_distances() {
        let dir = array![1.0, -2.0, 0.5];
        let ts = [0.0, 1.0, 2.5, -3.0, 0.25];
        let data = Array2::from_shape_fn((5, 3), |(i, j)| 0.3 + ts[i] * dir[j]);
        let e = pca_project(data.view(), 1).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = squared_distance(data.row(i), data.row(j)).sqrt();
                let got = (e.coords[[i, 0]] - e.coords[[j, 0]]).abs();
                assert!((want - got).abs() < 1e-9, "{want} vs {got}");
            }
        }
    }

    #[test]
    fn rejects_oversized_target() {
        let data = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(pca_project(data.view(), 3).is_err());
    }
}
