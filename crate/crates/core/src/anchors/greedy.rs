use ndarray::{Array1, Array2, ArrayView2};

use super::{candidate_centroid, candidates_from_mask, AnchorMethod, AnchorSet};
use crate::linalg::{dot, norm};
use crate::{Error, Result};

pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Pivoted Gram-Schmidt over the candidate rows of `points`.
///
/// The first anchor is the candidate farthest from the candidate centroid.
/// Every later anchor maximizes the residual of `x - x_first` after projecting
/// out the directions `anchor - x_first` chosen so far. Ties go to the smaller
/// word id.
pub fn greedy_anchors(points: ArrayView2<f64>, k: usize, candidate_mask: &[bool]) -> Result<AnchorSet> {
    if candidate_mask.len() != points.nrows() {
        return Err(Error::invalid("candidate mask length differs from point count"));
    }
    let candidates = candidates_from_mask(candidate_mask);
    if k > candidates.len() {
        return Err(Error::KTooLarge {
            requested: k,
            available: candidates.len(),
        });
    }
    let mut set = AnchorSet {
        word_ids: Vec::with_capacity(k),
        method: AnchorMethod::Greedy,
        scores: Vec::with_capacity(k),
        hull_dim: None,
    };
    if k == 0 {
        return Ok(set);
    }

    let centroid = Array1::from(candidate_centroid(points, &candidates));
    let (first, first_score) = argmax(candidates.iter().map(|&w| {
        let d = &points.row(w) - &centroid;
        (w, norm(d.view()))
    }));
    set.word_ids.push(first);
    set.scores.push(first_score);

    let origin = points.row(first).to_owned();
    let mut residuals = Array2::<f64>::zeros((candidates.len(), points.ncols()));
    for (r, &w) in candidates.iter().enumerate() {
        residuals.row_mut(r).assign(&(&points.row(w) - &origin));
    }
    let mut chosen = vec![false; candidates.len()];
    chosen[candidates.binary_search(&first).expect("first is a candidate")] = true;

    while set.len() < k {
        let (best_row, best_norm) = argmax(
            (0..candidates.len())
                .filter(|&r| !chosen[r])
                .map(|r| (r, norm(residuals.row(r)))),
        );
        if best_norm < RESIDUAL_FLOOR {
            return Err(Error::RankDeficiency {
                found: set.len(),
                requested: k,
                threshold: RESIDUAL_FLOOR,
            });
        }
        chosen[best_row] = true;
        set.word_ids.push(candidates[best_row]);
        set.scores.push(best_norm);

        let basis = residuals.row(best_row).to_owned() / best_norm;
        for mut r in residuals.rows_mut() {
            let c = dot(r.view(), basis.view());
            r.scaled_add(-c, &basis);
        }
    }
    Ok(set)
}

/// Largest score; on ties, the first (smallest) key seen.
fn argmax(items: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    items.fold(
        (usize::MAX, f64::NEG_INFINITY),
        |best, (i, s)| {
            if s > best.1 {
                (i, s)
            } else {
                best
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triangle_vertices_not_centroid() {
        let pts = array![[0.0, 0.0], [4.0, 0.0], [1.0, 3.0], [5.0 / 3.0, 1.0]];
        let set = greedy_anchors(pts.view(), 3, &[true; 4]).unwrap();
        let mut ids = set.word_ids.clone();
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn single_anchor_is_farthest_from_centroid() {
        let pts = array![[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [0.0, 1.0]];
        let set = greedy_anchors(pts.view(), 1, &[true; 4]).unwrap();
        assert_eq!(set.word_ids, vec![2]);
    }

    #[test]
    fn respects_candidate_mask() {
        let pts = array![[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [0.0, 1.0]];
        let set = greedy_anchors(pts.view(), 2, &[true, true, false, true]).unwrap();
        assert!(!set.word_ids.contains(&2));
    }

    #[test]
    fn collinear_points_are_rank_deficient() {
        let pts = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(
            greedy_anchors(pts.view(), 3, &[true; 4]),
            Err(Error::RankDeficiency { found: 2, .. })
        ));
    }

    #[test]
    fn nested_prefixes() {
        let pts = array![
            [0.3, 0.1, 0.9],
            [0.7, 0.2, 0.1],
            [0.1, 0.8, 0.4],
            [0.5, 0.5, 0.5],
            [0.9, 0.9, 0.0]
        ];
        let two = greedy_anchors(pts.view(), 2, &[true; 5]).unwrap();
        let three = greedy_anchors(pts.view(), 3, &[true; 5]).unwrap();
        assert_eq!(two.word_ids[..], three.word_ids[..2]);
    }
}
