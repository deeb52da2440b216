//! Topic-quality metrics.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::AnchorSet;
use crate::corpus::Document;
use crate::linalg::norm;
use crate::recover::TopicModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Top words per topic for coherence.
    pub coherence_top: usize,
    pub coherence_eps: f64,
    /// Symmetric Dirichlet concentration for the held-out estimator.
    pub alpha: f64,
    /// Floor added to zero anchor-row entries before held-out evaluation.
    pub smoothing: f64,
    pub particles: usize,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            coherence_top: 8,
            coherence_eps: 1.0,
            alpha: 0.1,
            smoothing: 1e-5,
            particles: 10,
            seed: 0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coherence_top < 2 {
            return Err(Error::invalid("coherence needs at least 2 top words"));
        }
        if !(self.coherence_eps > 0.0) {
            return Err(Error::invalid("coherence smoothing must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !(self.smoothing > 0.0) {
            return Err(Error::invalid("anchor smoothing floor must be positive"));
        }
        if self.particles == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        Ok(())
    }
}

/// Mean over all words of `‖Q̄_i - Σ_k C[i,k] Q̄_{s_k}‖₂`.
pub fn recovery_error(qbar: ArrayView2<f64>, model: &TopicModel) -> Result<f64> {
    let v = qbar.nrows();
    if model.c.nrows() != v {
        return Err(Error::invalid(
            "model and co-occurrence matrix differ in vocabulary size",
        ));
    }
    let rows = qbar.select(Axis(0), &model.anchors.word_ids);
    let fit = model.c.dot(&rows);
    let total: f64 = (0..v)
        .into_par_iter()
        .map(|i| norm((&qbar.row(i) - &fit.row(i)).view()))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total / v as f64)
}

/// Entropy in nats, with `0 log 0 = 0`.
pub fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.ln()).sum()
}

/// Mean of `H(z | w = i) / ln K` over the rows of `c` that carry mass.
///
/// All-zero rows belong to words excluded from recovery and are skipped.
pub fn normalized_entropy(c: ArrayView2<f64>) -> Result<f64> {
    let k = c.ncols();
    if k < 2 {
        return Err(Error::UndefinedForK1);
    }
    let log_k = (k as f64).ln();
    let (sum, n) = c
        .rows()
        .into_iter()
        .filter(|r| r.iter().any(|&x| x > 0.0))
        .fold((0.0, 0usize), |(s, n), r| {
            (s + entropy(r.iter().copied()) / log_k, n + 1)
        });
    if n == 0 {
        return Err(Error::invalid("no word has topic coefficients"));
    }
    Ok(sum / n as f64)
}

/// `KL(p ‖ q)` in nats; infinite when `p` has mass where `q` has none.
pub fn kl(p: impl IntoIterator<Item = f64>, q: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter()
        .zip(q)
        .map(|(pi, qi)| {
            if pi <= 0.0 {
                0.0
            } else if qi <= 0.0 {
                f64::INFINITY
            } else {
                pi * (pi / qi).ln()
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Specificity {
    #[serde(with = "crate::io::nonfinite")]
    pub value: f64,
    /// Some topic puts mass on a word with zero corpus probability.
    pub infinite: bool,
}

/// Mean KL divergence from each topic to the word marginal.
pub fn specificity(a: ArrayView2<f64>, p_w: &[f64]) -> Result<Specificity> {
    if a.nrows() != p_w.len() {
        return Err(Error::invalid("topic matrix and word marginal differ in length"));
    }
    if a.ncols() == 0 {
        return Err(Error::invalid("no topics"));
    }
    let sum: f64 = a
        .columns()
        .into_iter()
        .map(|col| kl(col.iter().copied(), p_w.iter().copied()))
        .sum();
    let value = sum / a.ncols() as f64;
    Ok(Specificity {
        value,
        infinite: value.is_infinite(),
    })
}

/// Largest distance from a topic column to the mean column.
pub fn dissimilarity(a: ArrayView2<f64>) -> Result<f64> {
    if a.ncols() == 0 {
        return Err(Error::invalid("no topics"));
    }
    let mean = a.mean_axis(Axis(1)).expect("at least one column");
    Ok(a.columns()
        .into_iter()
        .map(|col| norm((&mean - &col).view()))
        .fold(0.0, f64::max))
}

/// Indices of the `t` largest entries, larger first, ties by smaller index.
pub fn top_words(column: impl IntoIterator<Item = f64>, t: usize) -> Vec<usize> {
    let mut idx: Vec<(usize, f64)> = column.into_iter().enumerate().collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    idx.into_iter().take(t).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub per_topic: Vec<f64>,
    /// Mean over topics whose top words all occur in some training document.
    #[serde(with = "crate::io::nonfinite")]
    pub mean: f64,
    /// Topics with a top word of zero document frequency; their score omits
    /// the pairs led by that word.
    pub flagged: Vec<usize>,
}

/// Co-document coherence over ordered pairs of each topic's top `t` words:
/// `Σ_{w1 ≠ w2} ln((D(w1, w2) + eps) / D(w1))`.
pub fn coherence(a: ArrayView2<f64>, documents: &[Document], t: usize, eps: f64) -> Result<Coherence> {
    if t < 2 {
        return Err(Error::invalid("coherence needs at least 2 top words"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("coherence smoothing must be positive"));
    }
    let tops: Vec<Vec<usize>> = a
        .columns()
        .into_iter()
        .map(|col| top_words(col.iter().copied(), t))
        .collect();

    // Sorted document lists for just the words that appear in some top list.
    let mut postings: HashMap<usize, Vec<u32>> = tops.iter().flatten().map(|&w| (w, Vec::new())).collect();
    for (d, doc) in documents.iter().enumerate() {
        for &(w, _) in doc.counts() {
            if let Some(list) = postings.get_mut(&(w as usize)) {
                list.push(d as u32);
            }
        }
    }
    let co_df = |x: &[u32], y: &[u32]| {
        let (mut i, mut j, mut n) = (0, 0, 0usize);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    };

    let mut per_topic = Vec::with_capacity(tops.len());
    let mut flagged = Vec::new();
    for (k, top) in tops.iter().enumerate() {
        let mut score = 0.0;
        let mut zero = false;
        for &w1 in top {
            let d1 = &postings[&w1];
            if d1.is_empty() {
                zero = true;
                continue;
            }
            for &w2 in top.iter().filter(|&&w2| w2 != w1) {
                let both = co_df(d1, &postings[&w2]) as f64;
                score += ((both + eps) / d1.len() as f64).ln();
            }
        }
        if zero {
            flagged.push(k);
        }
        per_topic.push(score);
    }
    let kept: Vec<f64> = per_topic
        .iter()
        .enumerate()
        .filter(|(k, _)| flagged.binary_search(k).is_err())
        .map(|(_, &s)| s)
        .collect();
    let mean = if kept.is_empty() {
        f64::NAN
    } else {
        kept.iter().sum::<f64>() / kept.len() as f64
    };
    Ok(Coherence {
        per_topic,
        mean,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRanks {
    /// Words strictly more probable than the anchor, per topic.
    pub hard: Vec<usize>,
    /// Mean `ln(max_w A[w,k] / A[s_k,k])`.
    #[serde(with = "crate::io::nonfinite")]
    pub soft: f64,
}

pub fn anchor_ranks(a: ArrayView2<f64>, anchors: &AnchorSet) -> Result<AnchorRanks> {
    if anchors.len() != a.ncols() {
        return Err(Error::invalid("anchor count differs from topic count"));
    }
    if anchors.word_ids.iter().any(|&s| s >= a.nrows()) {
        return Err(Error::invalid("anchor outside vocabulary"));
    }
    if a.ncols() == 0 {
        return Err(Error::invalid("no topics"));
    }
    let mut hard = Vec::with_capacity(a.ncols());
    let mut soft = 0.0;
    for (k, col) in a.columns().into_iter().enumerate() {
        let pa = col[anchors.word_ids[k]];
        hard.push(col.iter().filter(|&&x| x > pa).count());
        let top = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        soft += (top / pa).ln();
    }
    Ok(AnchorRanks {
        hard,
        soft: soft / a.ncols() as f64,
    })
}

/// Raises zero entries of the anchor rows to `floor` and renormalizes columns.
pub fn smooth_anchors(a: ArrayView2<f64>, anchors: &[usize], floor: f64) -> Result<Array2<f64>> {
    if !(floor > 0.0) {
        return Err(Error::invalid("smoothing floor must be positive"));
    }
    let mut out = a.to_owned();
    for &s in anchors {
        if s >= out.nrows() {
            return Err(Error::invalid("anchor outside vocabulary"));
        }
        out.row_mut(s).mapv_inplace(|x| if x == 0.0 { floor } else { x });
    }
    for (k, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let z = col.sum();
        if !(z > 0.0) {
            return Err(Error::EmptyTopic { topic: k });
        }
        col.mapv_inplace(|x| x / z);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    /// Sum of per-document log-likelihoods, in nats.
    #[serde(with = "crate::io::nonfinite")]
    pub total: f64,
    pub tokens: usize,
    /// Tokens skipped because the model gives them no probability in any topic.
    pub oov_tokens: usize,
}

impl HeldOut {
    pub fn per_token(&self) -> f64 {
        if self.tokens == 0 {
            f64::NAN
        } else {
            self.total / self.tokens as f64
        }
    }
}

/// Sequential particle estimate of one document's log-likelihood.
///
/// Returns the log-likelihood, the number of scored tokens and the number of
/// skipped tokens.
pub fn document_loglik(
    a: ArrayView2<f64>,
    tokens: &[u32],
    alpha: f64,
    particles: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, usize, usize) {
    let k = a.ncols();
    let mut counts = vec![vec![0.0f64; k]; particles];
    let mut weights = vec![0.0f64; k];
    let mut ll = 0.0;
    let (mut seen, mut skipped) = (0usize, 0usize);
    let denom_alpha = k as f64 * alpha;
    for &w in tokens {
        let w = w as usize;
        if w >= a.nrows() || a.row(w).iter().all(|&x| x <= 0.0) {
            skipped += 1;
            continue;
        }
        let row = a.row(w);
        let denom = seen as f64 + denom_alpha;
        let mut mean = 0.0;
        for particle in counts.iter_mut() {
            let mut p = 0.0;
            for z in 0..k {
                weights[z] = row[z] * (particle[z] + alpha);
                p += weights[z];
            }
            mean += p / denom;
            let z = WeightedIndex::new(&weights)
                .expect("a positive weight exists")
                .sample(rng);
            particle[z] += 1.0;
        }
        ll += (mean / particles as f64).ln();
        seen += 1;
    }
    (ll, seen, skipped)
}

/// Left-to-right held-out log-likelihood summed over documents.
///
/// Document `d` draws from its own stream `d` of a generator seeded with `seed`,
/// so the total does not depend on thread scheduling.
pub fn heldout_loglik(
    a: ArrayView2<f64>,
    documents: &[Document],
    alpha: f64,
    seed: u64,
    particles: usize,
) -> Result<HeldOut> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if particles == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    if a.ncols() == 0 {
        return Err(Error::invalid("no topics"));
    }
    let per_doc: Vec<(f64, usize, usize)> = documents
        .par_iter()
        .enumerate()
        .map(|(d, doc)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(d as u64);
            document_loglik(a, doc.tokens(), alpha, particles, &mut rng)
        })
        .collect();
    let mut out = HeldOut {
        total: 0.0,
        tokens: 0,
        oov_tokens: 0,
    };
    for (ll, n, skipped) in per_doc {
        out.total += ll;
        out.tokens += n;
        out.oov_tokens += skipped;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k: usize,
    pub recovery_error: f64,
    /// Absent for a single topic.
    pub normalized_entropy: Option<f64>,
    pub specificity: Specificity,
    pub dissimilarity: f64,
    pub coherence: Coherence,
    pub hard_rank: Vec<usize>,
    #[serde(with = "crate::io::nonfinite")]
    pub soft_rank: f64,
    pub heldout: HeldOut,
    #[serde(with = "crate::io::nonfinite")]
    pub heldout_per_token: f64,
    pub unconverged_words: usize,
    pub config: MetricsConfig,
}

/// Every metric for one model.
pub fn evaluate(
    qbar: ArrayView2<f64>,
    model: &TopicModel,
    train: &[Document],
    heldout: &[Document],
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    config.validate()?;
    let a = model.a.view();
    let ne = match normalized_entropy(model.c.view()) {
        Ok(v) => Some(v),
        Err(Error::UndefinedForK1) => None,
        Err(e) => return Err(e),
    };
    let ranks = anchor_ranks(a, &model.anchors)?;
    let smoothed = smooth_anchors(a, &model.anchors.word_ids, config.smoothing)?;
    let held = heldout_loglik(smoothed.view(), heldout, config.alpha, config.seed, config.particles)?;
    Ok(MetricsReport {
        k: model.num_topics(),
        recovery_error: recovery_error(qbar, model)?,
        normalized_entropy: ne,
        specificity: specificity(a, &model.p_w)?,
        dissimilarity: dissimilarity(a)?,
        coherence: coherence(a, train, config.coherence_top, config.coherence_eps)?,
        hard_rank: ranks.hard,
        soft_rank: ranks.soft,
        heldout_per_token: held.per_token(),
        heldout: held,
        unconverged_words: model.diagnostics.unconverged(),
        config: config.clone(),
    })
}

/// One line of a K-sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub method: String,
    pub recovery_error: f64,
    pub normalized_entropy: Option<f64>,
    pub specificity: f64,
    pub dissimilarity: f64,
    pub coherence: f64,
    pub soft_rank: f64,
    pub mean_hard_rank: f64,
    pub heldout_loglik: f64,
    pub heldout_per_token: f64,
}

impl SweepRow {
    pub fn new(method: impl Into<String>, report: &MetricsReport) -> Self {
        let hard = Array1::from_iter(report.hard_rank.iter().map(|&h| h as f64));
        SweepRow {
            k: report.k,
            method: method.into(),
            recovery_error: report.recovery_error,
            normalized_entropy: report.normalized_entropy,
            specificity: report.specificity.value,
            dissimilarity: report.dissimilarity,
            coherence: report.coherence.mean,
            soft_rank: report.soft_rank,
            mean_hard_rank: hard.mean().unwrap_or(0.0),
            heldout_loglik: report.heldout.total,
            heldout_per_token: report.heldout_per_token,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::AnchorMethod;
    use ndarray::array;

    fn anchors(ids: Vec<usize>) -> AnchorSet {
        AnchorSet {
            scores: vec![0.0; ids.len()],
            word_ids: ids,
            method: AnchorMethod::Greedy,
            hull_dim: None,
        }
    }

    #[test]
    fn entropy_examples() {
        let uniform = Array2::from_elem((4, 3), 1.0 / 3.0);
        assert!((normalized_entropy(uniform.view()).unwrap() - 1.0).abs() < 1e-12);
        let eye = Array2::<f64>::eye(3);
        assert_eq!(normalized_entropy(eye.view()).unwrap(), 0.0);
        let half = array![[0.5, 0.5, 0.0]];
        let expected = 2f64.ln() / 3f64.ln();
        assert!((normalized_entropy(half.view()).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(
            normalized_entropy(array![[1.0]].view()),
            Err(Error::UndefinedForK1)
        ));
    }

    #[test]
    fn specificity_zero_at_marginal() {
        let p = [0.2, 0.3, 0.5];
        let a = array![[0.2, 0.2], [0.3, 0.3], [0.5, 0.5]];
        assert_eq!(specificity(a.view(), &p).unwrap().value, 0.0);
        let b = array![[0.5], [0.5], [0.0]];
        let s = specificity(b.view(), &[0.5, 0.0, 0.5]).unwrap();
        assert!(s.infinite);
    }

    #[test]
    fn dissimilarity_point_masses() {
        let a = array![[1.0, 0.0], [0.0, 1.0]];
        assert!((dissimilarity(a.view()).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ranks() {
        let a = array![[0.5, 0.1], [0.3, 0.2], [0.2, 0.7]];
        let r = anchor_ranks(a.view(), &anchors(vec![0, 2])).unwrap();
        assert_eq!(r.hard, vec![0, 0]);
        assert_eq!(r.soft, 0.0);
        let r = anchor_ranks(a.view(), &anchors(vec![2, 2])).unwrap();
        assert_eq!(r.hard[0], 2);
    }

    #[test]
    fn smoothing_floors_anchor_zeros() {
        let a = array![[0.0, 0.4], [1.0, 0.6]];
        let s = smooth_anchors(a.view(), &[0], 1e-5).unwrap();
        assert!((s[[0, 0]] - 1e-5 / (1.0 + 1e-5)).abs() < 1e-18);
        assert_eq!(s[[0, 1]], 0.4);
        let unchanged = smooth_anchors(a.view(), &[1], 1e-5).unwrap();
        assert_eq!(unchanged, a);
    }

    #[test]
    fn coherence_all_docs() {
        let docs: Vec<Document> = (0..4).map(|_| Document::from_tokens(vec![0, 1, 2])).collect();
        let a = array![[0.6], [0.3], [0.1]];
        let c = coherence(a.view(), &docs, 2, 1.0).unwrap();
        assert!((c.per_topic[0] - 2.0 * (5.0f64 / 4.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn heldout_single_topic_is_exact() {
        let a = array![[0.5], [0.3], [0.2]];
        let docs = vec![
            Document::from_tokens(vec![0, 1, 1, 2]),
            Document::from_tokens(vec![2, 7]),
        ];
        let h = heldout_loglik(a.view(), &docs, 0.1, 3, 4).unwrap();
        let expected = 0.5f64.ln() + 2.0 * 0.3f64.ln() + 2.0 * 0.2f64.ln();
        assert!((h.total - expected).abs() < 1e-12);
        assert_eq!(h.oov_tokens, 1);
        assert_eq!(h.tokens, 5);
    }
}
