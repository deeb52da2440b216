//! Topic recovery from anchors.
//!
//! Each non-anchor word's row of `Q̄` is approximated by a convex combination
//! of the anchor rows; the weights are `p(z | w)`. Bayes' rule with the word
//! marginal then gives the topic-word matrix `p(w | z)`.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::AnchorSet;
use crate::cooccur::CooccurrenceStats;
use crate::{Error, Result};

const MAX_HALVINGS: usize = 60;
/// Coefficients below this fraction of the largest start the active-set phase at zero.
const DROP_RATIO: f64 = 1e-4;
/// Coefficients this close to zero after a support solve are treated as zero.
const COEFF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the duality gap, an upper bound on the remaining objective
    /// improvement, falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Exponentiated-gradient step, divided by the largest squared anchor-row norm.
    pub initial_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-7,
            max_iter: 500,
            initial_step: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub coeffs: Vec<f64>,
    /// `½‖target - Σ_k c_k row_k‖²` at the returned coefficients.
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out (or the step size underflowed) with the
    /// duality gap still above `tol`.
    pub converged: bool,
    /// Objective value after every accepted iteration, starting from the uniform point.
    pub trace: Vec<f64>,
}

/// Quadratic `h(c) = ½ cᵀGc - bᵀc`, equal to the objective up to a constant.
fn quad(gram: &Array2<f64>, b: &[f64], c: &[f64]) -> f64 {
    let k = c.len();
    let mut h = 0.0;
    for i in 0..k {
        let mut gi = 0.0;
        for j in 0..k {
            gi += gram[[i, j]] * c[j];
        }
        h += c[i] * (0.5 * gi - b[i]);
    }
    h
}

fn solve_gram(gram: &Array2<f64>, b: &[f64], t_sq: f64, config: &SolverConfig) -> SimplexSolution {
    let k = b.len();
    if k == 1 {
        let h = quad(gram, b, &[1.0]);
        return SimplexSolution {
            coeffs: vec![1.0],
            objective: (h + 0.5 * t_sq).max(0.0),
            iterations: 0,
            converged: true,
            trace: vec![h + 0.5 * t_sq],
        };
    }
    let scale = (0..k).map(|i| gram[[i, i]]).fold(0.0, f64::max);
    let mut eta = if scale > 0.0 {
        config.initial_step / scale
    } else {
        config.initial_step
    };
    let mut c = vec![1.0 / k as f64; k];
    let mut h = quad(gram, b, &c);
    let mut trace = vec![h + 0.5 * t_sq];
    let mut grad = vec![0.0; k];
    let mut next = vec![0.0; k];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        for i in 0..k {
            grad[i] = (0..k).map(|j| gram[[i, j]] * c[j]).sum::<f64>() - b[i];
        }
        let gmin = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let gap = grad.iter().zip(&c).map(|(g, ci)| g * ci).sum::<f64>() - gmin;
        if gap < config.tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let mut z = 0.0;
            for i in 0..k {
                next[i] = c[i] * (-eta * (grad[i] - gmin)).exp();
                z += next[i];
            }
            next.iter_mut().for_each(|x| *x /= z);
            let h_next = quad(gram, b, &next);
            if h_next < h {
                std::mem::swap(&mut c, &mut next);
                h = h_next;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        trace.push(h + 0.5 * t_sq);
    }
    // The gap test is absolute and the objective can be tiny, so a point that
    // passes it may still be far from the minimizer along flat directions.
    // The EG support can also be affinely dependent, so the best vertex is
    // tried as a second start.
    let best_vertex = (0..k)
        .min_by(|&i, &j| (0.5 * gram[[i, i]] - b[i]).total_cmp(&(0.5 * gram[[j, j]] - b[j])))
        .expect("k >= 2");
    let mut vertex = vec![0.0; k];
    vertex[best_vertex] = 1.0;
    let mut refined = false;
    for start in [c.clone(), vertex] {
        if let Some(exact) = refine_active_set(gram, b, &start) {
            let h_exact = quad(gram, b, &exact);
            if h_exact <= h {
                c = exact;
                h = h_exact;
                refined = true;
            }
        }
    }
    if refined {
        trace.push(h + 0.5 * t_sq);
        converged = duality_gap(gram, b, &c) < config.tol;
    }
    SimplexSolution {
        objective: (h + 0.5 * t_sq).max(0.0),
        coeffs: c,
        iterations,
        converged,
        trace,
    }
}

fn gradient(gram: &Array2<f64>, b: &[f64], c: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|i| (0..b.len()).map(|j| gram[[i, j]] * c[j]).sum::<f64>() - b[i])
        .collect()
}

/// `gᵀc - min_k g_k`, an upper bound on `h(c) - min h` over the simplex.
fn duality_gap(gram: &Array2<f64>, b: &[f64], c: &[f64]) -> f64 {
    let g = gradient(gram, b, c);
    let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
    g.iter().zip(c).map(|(gi, ci)| gi * ci).sum::<f64>() - gmin
}

/// Minimizer of `h` restricted to the coordinates in `support`, summing to one.
fn solve_on_support(gram: &Array2<f64>, b: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let m = support.len();
    let mut kkt = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut rhs = DVector::<f64>::zeros(m + 1);
    for (r, &i) in support.iter().enumerate() {
        for (s, &j) in support.iter().enumerate() {
            kkt[(r, s)] = gram[[i, j]];
        }
        kkt[(r, m)] = 1.0;
        kkt[(m, r)] = 1.0;
        rhs[r] = b[i];
    }
    rhs[m] = 1.0;
    // Supports can be affinely dependent; a rank-revealing solve still returns a minimizer.
    let svd = kkt.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let x = svd.solve(&rhs, eps).ok()?;
    x.iter().all(|v| v.is_finite()).then(|| x.as_slice()[..m].to_vec())
}

/// Primal active-set iterations started from `start` with its negligible
/// coefficients dropped. Each step either reaches the minimizer on the current
/// support or moves toward it until a coefficient hits zero.
fn refine_active_set(gram: &Array2<f64>, b: &[f64], start: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let cmax = start.iter().copied().fold(0.0, f64::max);
    let mut c: Vec<f64> = start
        .iter()
        .map(|&x| if x > DROP_RATIO * cmax { x } else { 0.0 })
        .collect();
    let z: f64 = c.iter().sum();
    c.iter_mut().for_each(|x| *x /= z);
    let mut active: Vec<bool> = c.iter().map(|&x| x > 0.0).collect();
    let scale = (0..k).map(|i| gram[[i, i]]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for _ in 0..10 * k + 50 {
        let support: Vec<usize> = (0..k).filter(|&i| active[i]).collect();
        let sol = solve_on_support(gram, b, &support)?;
        let mut target = vec![0.0; k];
        for (&i, x) in support.iter().zip(sol) {
            // Rounding noise on a coefficient that belongs at zero.
            target[i] = if x.abs() < COEFF_EPS { 0.0 } else { x };
        }
        if target.iter().all(|&x| x >= 0.0) {
            c = target;
            let g = gradient(gram, b, &c);
            let g_support = support.iter().map(|&i| g[i]).fold(f64::INFINITY, f64::min);
            let entering = (0..k)
                .filter(|&i| !active[i] && g[i] < g_support - 1e-12 * scale)
                .min_by(|&i, &j| g[i].total_cmp(&g[j]));
            match entering {
                Some(j) => active[j] = true,
                None => return Some(c),
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = support[0];
            for &i in &support {
                if target[i] < 0.0 {
                    let a = c[i] / (c[i] - target[i]);
                    if a < alpha {
                        alpha = a;
                        blocking = i;
                    }
                }
            }
            for i in 0..k {
                c[i] += alpha * (target[i] - c[i]);
                if c[i] <= 0.0 {
                    c[i] = 0.0;
                    active[i] = false;
                }
            }
            c[blocking] = 0.0;
            active[blocking] = false;
            if !active.iter().any(|&a| a) {
                return None;
            }
        }
    }
    None
}

/// Minimizes `½‖target - Σ_k c_k anchor_rows[k]‖²` over the probability simplex
/// with exponentiated-gradient steps from the uniform point, halving the step
/// whenever it fails to decrease the objective.
pub fn solve_simplex_coeffs(
    target: ArrayView1<f64>,
    anchor_rows: ArrayView2<f64>,
    config: &SolverConfig,
) -> Result<SimplexSolution> {
    if anchor_rows.nrows() == 0 {
        return Err(Error::invalid("need at least one anchor row"));
    }
    if anchor_rows.ncols() != target.len() {
        return Err(Error::invalid("target and anchor rows differ in length"));
    }
    let gram = anchor_rows.dot(&anchor_rows.t());
    let b = anchor_rows.dot(&target).to_vec();
    let t_sq = target.dot(&target);
    let mut sol = solve_gram(&gram, &b, t_sq, config);
    let fit = anchor_rows.t().dot(&Array1::from(sol.coeffs.clone()));
    sol.objective = 0.5 * (&target - &fit).mapv(|x| x * x).sum();
    Ok(sol)
}

/// `A[i, k] = C[i, k] p(w_i) / Σ_j C[j, k] p(w_j)`.
pub fn recover_topic_word(c: ArrayView2<f64>, p_w: &[f64]) -> Result<Array2<f64>> {
    if c.nrows() != p_w.len() {
        return Err(Error::invalid("coefficient rows and word marginal differ in length"));
    }
    let mut a = c.to_owned();
    for (mut row, &p) in a.axis_iter_mut(Axis(0)).zip(p_w) {
        row.mapv_inplace(|x| x * p);
    }
    for (k, mut col) in a.axis_iter_mut(Axis(1)).enumerate() {
        let z = col.sum();
        if !(z > 0.0) {
            return Err(Error::EmptyTopic { topic: k });
        }
        col.mapv_inplace(|x| x / z);
    }
    Ok(a)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    /// Final objective per word (zero for anchors and excluded words).
    pub objective: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Words with an all-zero co-occurrence row, left out of recovery.
    pub excluded: Vec<usize>,
}

impl SolverDiagnostics {
    pub fn unconverged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    /// `V x K`, column `k` is `p(w | z = k)`.
    pub a: Array2<f64>,
    /// `V x K`, row `i` is `p(z | w = i)`; all-zero for excluded words.
    pub c: Array2<f64>,
    pub anchors: AnchorSet,
    pub p_w: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.a.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.a.nrows()
    }
}

/// Recovers a `k`-topic model from the first `k` anchors.
pub fn recover_model(
    stats: &CooccurrenceStats,
    anchor_set: &AnchorSet,
    k: usize,
    config: &SolverConfig,
) -> Result<TopicModel> {
    let anchors = anchor_set.truncate(k)?;
    if k == 0 {
        return Err(Error::invalid("need at least one topic"));
    }
    let v = stats.vocab_size();
    let mut anchor_of = vec![None; v];
    for (topic, &w) in anchors.word_ids.iter().enumerate() {
        if w >= v {
            return Err(Error::invalid(format!("anchor {w} outside vocabulary of {v}")));
        }
        if stats.is_zero_row(w) {
            return Err(Error::invalid(format!("anchor {w} never co-occurs with any word")));
        }
        if anchor_of[w].replace(topic).is_some() {
            return Err(Error::invalid(format!("anchor {w} listed twice")));
        }
    }

    let rows = stats.qbar.select(Axis(0), &anchors.word_ids);
    let gram = rows.dot(&rows.t());
    // b_i = anchor_rows · Q̄_i for every word at once.
    let cross = stats.qbar.dot(&rows.t());

    let solved: Vec<(Vec<f64>, f64, usize, bool)> = (0..v)
        .into_par_iter()
        .map(|i| {
            if stats.is_zero_row(i) {
                return (vec![0.0; k], 0.0, 0, true);
            }
            if let Some(topic) = anchor_of[i] {
                let mut e = vec![0.0; k];
                e[topic] = 1.0;
                return (e, 0.0, 0, true);
            }
            let row = stats.qbar.row(i);
            let b: Vec<f64> = cross.row(i).to_vec();
            let sol = solve_gram(&gram, &b, row.dot(&row), config);
            (sol.coeffs, sol.objective, sol.iterations, sol.converged)
        })
        .collect();

    let mut c = Array2::<f64>::zeros((v, k));
    let mut diagnostics = SolverDiagnostics {
        objective: Vec::with_capacity(v),
        iterations: Vec::with_capacity(v),
        converged: Vec::with_capacity(v),
        excluded: stats.zero_rows.clone(),
    };
    for (i, (coeffs, obj, iters, conv)) in solved.into_iter().enumerate() {
        c.row_mut(i).assign(&Array1::from(coeffs));
        diagnostics.objective.push(obj);
        diagnostics.iterations.push(iters);
        diagnostics.converged.push(conv);
    }
    let a = recover_topic_word(c.view(), &stats.p_w)?;
    Ok(TopicModel {
        a,
        c,
        anchors,
        p_w: stats.p_w.clone(),
        diagnostics,
    })
}
