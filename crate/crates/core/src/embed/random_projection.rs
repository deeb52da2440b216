use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbedMeta, EmbedMethod, Embedding};
use crate::{Error, Result};

/// The `n_in x d` sparse sign matrix: `+s` with probability `density_pos`,
/// `-s` with probability `density_neg`, zero otherwise, with
/// `s = 1 / sqrt(d * (density_pos + density_neg))`.
///
/// Entries are drawn row-major from a ChaCha8 stream seeded with `seed`, one
/// uniform `f64` per entry.
pub fn sparse_projection_matrix(
    n_in: usize,
    d: usize,
    density_pos: f64,
    density_neg: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    if d == 0 {
        return Err(Error::invalid("projection dimension must be at least 1"));
    }
    if density_pos < 0.0 || density_neg < 0.0 || density_pos + density_neg > 1.0 {
        return Err(Error::invalid(format!(
            "densities ({density_pos}, {density_neg}) must be nonnegative with sum at most 1"
        )));
    }
    let total = density_pos + density_neg;
    let scale = if total > 0.0 {
        1.0 / (d as f64 * total).sqrt()
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Array2::from_shape_simple_fn((n_in, d), || {
        let u: f64 = rng.random();
        if u < density_pos {
            scale
        } else if u < total {
            -scale
        } else {
            0.0
        }
    }))
}

pub fn sparse_random_project(
    qbar: ArrayView2<f64>,
    d: usize,
    density_pos: f64,
    density_neg: f64,
    seed: u64,
) -> Result<Embedding> {
    let proj = sparse_projection_matrix(qbar.ncols(), d, density_pos, density_neg, seed)?;
    Embedding::new(
        qbar.dot(&proj),
        EmbedMethod::RandomProjection,
        seed,
        EmbedMeta {
            density: Some((density_pos, density_neg)),
            ..EmbedMeta::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_density_gives_zero_embedding() {
        let q = array![[0.2, 0.8], [0.5, 0.5]];
        let e = sparse_random_project(q.view(), 4, 0.0, 0.0, 3).unwrap();
        assert!(e.coords.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_densities() {
        let q = array![[1.0]];
        assert!(sparse_random_project(q.view(), 2, 0.7, 0.4, 0).is_err());
        assert!(sparse_random_project(q.view(), 0, 0.05, 0.05, 0).is_err());
    }

    #[test]
    fn pure_function_of_inputs() {
        let q = array![[0.1, 0.9, 0.0], [0.3, 0.3, 0.4]];
        let a = sparse_random_project(q.view(), 50, 0.05, 0.05, 11).unwrap();
        let b = sparse_random_project(q.view(), 50, 0.05, 0.05, 11).unwrap();
        assert_eq!(a.coords, b.coords);
    }
}
