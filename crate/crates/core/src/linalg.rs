//! Small dense linear-algebra kernels shared by the embedding and anchor code.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm(a: ArrayView1<f64>) -> f64 {
    dot(a, a).sqrt()
}

pub fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean of the rows of `data`.
pub fn row_mean(data: ArrayView2<f64>) -> Array1<f64> {
    let n = data.nrows().max(1) as f64;
    data.sum_axis(Axis(0)) / n
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let scale: f64 = m.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}

/// Orthonormalizes the columns of `q` in place (two passes of modified
/// Gram-Schmidt). Columns that collapse are replaced by seeded random
/// directions orthogonal to the preceding ones.
pub fn orthonormalize_columns(q: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
    let (n, b) = q.dim();
    for j in 0..b {
        let mut done = false;
        for _attempt in 0..8 {
            let before = norm(q.column(j));
            for _pass in 0..2 {
                for i in 0..j {
                    let r = dot(q.column(i), q.column(j));
                    let qi = q.column(i).to_owned();
                    q.column_mut(j).scaled_add(-r, &qi);
                }
            }
            let after = norm(q.column(j));
            if after > 1e-8 * before && after > 1e-300 {
                q.column_mut(j).mapv_inplace(|x| x / after);
                done = true;
                break;
            }
            if j >= n {
                break;
            }
            for x in q.column_mut(j).iter_mut() {
                *x = rng.random::<f64>() - 0.5;
            }
        }
        if !done {
            q.column_mut(j).fill(0.0);
        }
    }
}

/// Leading eigenpairs of `XᵀX` for a centered data matrix `X`, by block
/// subspace iteration with Rayleigh-Ritz extraction.
pub struct TopEigen {
    /// Eigenvalues of `XᵀX`, descending.
    pub values: Vec<f64>,
    /// `m x v` orthonormal eigenvectors.
    pub vectors: Array2<f64>,
    pub iterations: usize,
}

pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 5000;

pub fn top_eigen_gram(x: ArrayView2<f64>, v: usize, seed: u64) -> Result<TopEigen> {
    let m = x.ncols();
    if v == 0 || v > m {
        return Err(Error::invalid(format!(
            "cannot extract {v} components from {m} columns"
        )));
    }
    let block = (v + 10).min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Array2::<f64>::zeros((m, block));
    for val in q.iter_mut() {
        *val = rng.random::<f64>() - 0.5;
    }
    orthonormalize_columns(&mut q, &mut rng);

    let apply = |q: &Array2<f64>| -> Array2<f64> { x.t().dot(&x.dot(q)) };

    for it in 1..=EIGEN_MAX_ITER {
        let mut z = apply(&q);
        orthonormalize_columns(&mut z, &mut rng);
        let gz = apply(&z);
        let t = z.t().dot(&gz);
        let t = (&t + &t.t()) * 0.5;
        let (vals, vecs) = symmetric_eigen(&t);
        q = z.dot(&vecs);
        let gq = gz.dot(&vecs);

        let lead = vals[0].abs();
        if lead == 0.0 {
            return Ok(TopEigen {
                values: vec![0.0; v],
                vectors: q.slice(ndarray::s![.., ..v]).to_owned(),
                iterations: it,
            });
        }
        let converged = (0..v).all(|k| {
            let r = &gq.column(k) - &(&q.column(k) * vals[k]);
            norm(r.view()) <= EIGEN_TOL * lead
        });
        if converged || block == m {
            return Ok(TopEigen {
                values: vals[..v].to_vec(),
                vectors: q.slice(ndarray::s![.., ..v]).to_owned(),
                iterations: it,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: EIGEN_MAX_ITER,
        tol: EIGEN_TOL,
    })
}
