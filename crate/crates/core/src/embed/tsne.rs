//! Exact t-SNE with perplexity-calibrated Gaussian affinities.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pca::PcaFit, EmbedMeta, EmbedMethod, Embedding};
use crate::{Error, Result};

/// Entropy tolerance in bits for the per-point bandwidth search.
pub const ENTROPY_TOL: f64 = 1e-5;
pub const MAX_BISECTION_STEPS: usize = 64;
/// Half-width, in natural-log units, of the precision bracket around the initial guess.
const LOG_BETA_SPAN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreReduce {
    /// Reduce to 50 dimensions with PCA when there are more than 2000 points.
    Auto,
    Never,
    Dim(usize),
}

impl PreReduce {
    fn target(self, n_points: usize, n_cols: usize) -> Option<usize> {
        let d = match self {
            PreReduce::Never => return None,
            PreReduce::Auto if n_points > 2000 => 50,
            PreReduce::Auto => return None,
            PreReduce::Dim(d) => d,
        };
        (d < n_cols).then_some(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Initial coordinates are `N(0, init_std²)`.
    pub init_std: f64,
    pub kl_every: usize,
    pub seed: u64,
    pub pre_reduce: PreReduce,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            max_iter: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            init_std: 1e-4,
            kl_every: 50,
            seed: 0,
            pre_reduce: PreReduce::Auto,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if !(self.perplexity > 0.0) || self.perplexity >= n_points as f64 {
            return Err(Error::invalid(format!(
                "perplexity {} must be positive and below the number of points {n_points}",
                self.perplexity
            )));
        }
        if !(self.learning_rate > 0.0 && self.early_exaggeration > 0.0 && self.init_std > 0.0) || self.kl_every == 0 {
            return Err(Error::invalid("t-SNE parameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Affinities {
    /// Symmetric joint affinities, zero diagonal, summing to one.
    pub p: Array2<f64>,
    /// Precision `1 / (2 σ_i²)` found for each point.
    pub betas: Vec<f64>,
    /// Entropy of each conditional `p(·|i)` in bits.
    pub entropies: Vec<f64>,
}

fn pairwise_sq_distances(points: ArrayView2<f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut d = Array2::<f64>::zeros((n, n));
    d.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let yi = points.row(i);
            for (j, out) in row.iter_mut().enumerate() {
                *out = yi
                    .iter()
                    .zip(points.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
            }
        });
    d
}

/// Conditional distribution of row `i` at precision `beta`; returns entropy in nats.
fn conditional(dist: &[f64], i: usize, dmin: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut z = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, o)) in dist.iter().zip(out.iter_mut()).enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let w = (-beta * (d - dmin)).exp();
        *o = w;
        z += w;
        weighted += w * (d - dmin);
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    z.ln() + beta * weighted / z
}

fn calibrate_row(dist: &[f64], i: usize, target_bits: f64, out: &mut [f64]) -> Result<(f64, f64)> {
    let ln2 = std::f64::consts::LN_2;
    let others = dist.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d);
    let dmin = others.clone().fold(f64::INFINITY, f64::min);
    let n_others = dist.len() - 1;
    let mean_gap = others.map(|d| d - dmin).sum::<f64>() / n_others as f64;

    if mean_gap == 0.0 {
        // All neighbours equidistant: every bandwidth gives the uniform distribution.
        let h = conditional(dist, i, dmin, 1.0, out) / ln2;
        if (h - target_bits).abs() <= ENTROPY_TOL {
            return Ok((1.0, h));
        }
        return Err(Error::SearchFailure {
            point: i,
            target: target_bits,
        });
    }

    let center = (1.0 / mean_gap).ln();
    let (mut lo, mut hi) = (center - LOG_BETA_SPAN, center + LOG_BETA_SPAN);
    let h_lo = conditional(dist, i, dmin, lo.exp(), out) / ln2;
    if (h_lo - target_bits).abs() <= ENTROPY_TOL {
        return Ok((lo.exp(), h_lo));
    }
    let h_hi = conditional(dist, i, dmin, hi.exp(), out) / ln2;
    if (h_hi - target_bits).abs() <= ENTROPY_TOL {
        return Ok((hi.exp(), h_hi));
    }
    if !(h_lo > target_bits && target_bits > h_hi) {
        return Err(Error::SearchFailure {
            point: i,
            target: target_bits,
        });
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let h = conditional(dist, i, dmin, mid.exp(), out) / ln2;
        if (h - target_bits).abs() <= ENTROPY_TOL {
            return Ok((mid.exp(), h));
        }
        // Entropy falls as precision grows.
        if h > target_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::SearchFailure {
        point: i,
        target: target_bits,
    })
}

/// Gaussian affinities with per-point bandwidths matched to `perplexity`, symmetrized
/// as `p_ij = (p_{j|i} + p_{i|j}) / 2N`.
pub fn tsne_affinities(points: ArrayView2<f64>, perplexity: f64) -> Result<Affinities> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::invalid("t-SNE needs at least two points"));
    }
    if !(perplexity > 0.0) || perplexity >= n as f64 {
        return Err(Error::invalid(format!(
            "perplexity {perplexity} must be positive and below the number of points {n}"
        )));
    }
    let target = perplexity.log2();
    let dist = pairwise_sq_distances(points);
    let mut cond = Array2::<f64>::zeros((n, n));
    let calib: Vec<Result<(f64, f64)>> = cond
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| calibrate_row(dist.row(i).as_slice().expect("standard layout"), i, target, row))
        .collect();
    let mut betas = Vec::with_capacity(n);
    let mut entropies = Vec::with_capacity(n);
    for c in calib {
        let (b, h) = c?;
        betas.push(b);
        entropies.push(h);
    }
    let scale = 1.0 / (2.0 * n as f64);
    let p = Array2::from_shape_fn((n, n), |(i, j)| (cond[[i, j]] + cond[[j, i]]) * scale);
    Ok(Affinities { p, betas, entropies })
}

/// Unnormalized Student-t kernel `(1 + ‖y_i - y_j‖²)⁻¹` for row `i`, and its sum over `j ≠ i`.
fn kernel_row(y: ArrayView2<f64>, i: usize, out: &mut [f64]) -> f64 {
    let yi = y.row(i);
    let mut sum = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let d2: f64 = yi.iter().zip(y.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        *o = 1.0 / (1.0 + d2);
        sum += *o;
    }
    sum
}

fn kernel_total(y: ArrayView2<f64>) -> f64 {
    let n = y.nrows();
    let sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(|| vec![0.0; n], |buf, i| kernel_row(y, i, buf))
        .collect();
    sums.iter().sum()
}

/// `KL(P ‖ Q)` for the embedding `y`; zero entries of `P` contribute nothing.
pub fn kl_divergence(p: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    let n = y.nrows();
    let z = kernel_total(y);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, i| {
                kernel_row(y, i, buf);
                let mut s = 0.0;
                for (j, &k) in buf.iter().enumerate() {
                    let pij = p[[i, j]];
                    if j != i && pij > 0.0 {
                        s += pij * (pij / (k / z)).ln();
                    }
                }
                s
            },
        )
        .collect();
    rows.iter().sum()
}

/// `∂KL/∂y_i = 4 Σ_j (p_ij - q_ij)(y_i - y_j)(1 + ‖y_i - y_j‖²)⁻¹`.
pub fn kl_gradient(p: ArrayView2<f64>, y: ArrayView2<f64>) -> Array2<f64> {
    let (n, dim) = y.dim();
    let z = kernel_total(y);
    let mut grad = Array2::<f64>::zeros((n, dim));
    grad.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(dim.max(1))
        .enumerate()
        .for_each_init(
            || vec![0.0; n],
            |buf, (i, g)| {
                kernel_row(y, i, buf);
                for (j, &k) in buf.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let mult = 4.0 * (p[[i, j]] - k / z) * k;
                    for (c, gc) in g.iter_mut().enumerate() {
                        *gc += mult * (y[[i, c]] - y[[j, c]]);
                    }
                }
            },
        );
    grad
}

#[derive(Debug, Clone)]
pub struct TsneRun {
    pub embedding: Embedding,
    pub affinities: Affinities,
}

/// Embeds the rows of `data` into `v` dimensions by gradient descent on `KL(P ‖ Q)`.
///
/// Uses the reference optimizer schedule: early exaggeration of `P`, a momentum
/// switch, per-coordinate adaptive gains, and re-centering after every step.
pub fn tsne_project(data: ArrayView2<f64>, v: usize, config: &TsneConfig) -> Result<TsneRun> {
    let n = data.nrows();
    config.validate(n)?;
    if v == 0 {
        return Err(Error::invalid("t-SNE target dimension must be positive"));
    }
    let pre_dim = config.pre_reduce.target(n, data.ncols());
    let reduced;
    let input = match pre_dim {
        Some(d) => {
            reduced = PcaFit::fit(data, d)?.coords;
            reduced.view()
        }
        None => data,
    };
    let affinities = tsne_affinities(input, config.perplexity)?;
    let p = &affinities.p;
    let p_exag = p * config.early_exaggeration;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_std).expect("positive std");
    let mut y = Array2::from_shape_simple_fn((n, v), || normal.sample(&mut rng));
    let mut update = Array2::<f64>::zeros((n, v));
    let mut gains = Array2::<f64>::ones((n, v));
    let mut kl_history = Vec::new();
    let mut last_kl = f64::NAN;

    for iter in 0..config.max_iter {
        let exaggerating = iter < config.exaggeration_iters;
        let grad = kl_gradient(if exaggerating { p_exag.view() } else { p.view() }, y.view());
        let momentum = if iter < config.momentum_switch_iter {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        ndarray::Zip::from(&mut gains)
            .and(&grad)
            .and(&update)
            .for_each(|g, &dy, &u| {
                *g = if (dy > 0.0) != (u > 0.0) { *g + 0.2 } else { *g * 0.8 };
                if *g < 0.01 {
                    *g = 0.01;
                }
            });
        ndarray::Zip::from(&mut update)
            .and(&gains)
            .and(&grad)
            .for_each(|u, &g, &dy| *u = momentum * *u - config.learning_rate * g * dy);
        y += &update;
        let mean = y.mean_axis(Axis(0)).expect("nonempty");
        y -= &mean.insert_axis(Axis(0));

        if y.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteUpdate {
                iteration: iter,
                last_kl,
            });
        }
        let done = iter + 1 == config.max_iter;
        if (iter + 1) % config.kl_every == 0 || done {
            last_kl = kl_divergence(p.view(), y.view());
            kl_history.push((iter + 1, last_kl));
        }
    }
    if config.max_iter == 0 {
        last_kl = kl_divergence(p.view(), y.view());
    }
    log::debug!("t-SNE finished: KL {last_kl:.6} after {} iterations", config.max_iter);

    let embedding = Embedding::new(
        y,
        EmbedMethod::Tsne,
        config.seed,
        EmbedMeta {
            final_kl: Some(last_kl),
            kl_history,
            pre_reduced_dim: pre_dim,
            ..EmbedMeta::default()
        },
    )?;
    Ok(TsneRun { embedding, affinities })
}
