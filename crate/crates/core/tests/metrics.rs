use anchorhull::metrics::{
    anchor_ranks, coherence, dissimilarity, document_loglik, heldout_loglik, kl, normalized_entropy, recovery_error,
    smooth_anchors, specificity,
};
use anchorhull::recover::{recover_model, SolverDiagnostics};
use anchorhull::{AnchorMethod, AnchorSet, CooccurrenceStats, Document, Error, SolverConfig, TopicModel};
use approx::assert_abs_diff_eq;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn anchors(ids: Vec<usize>) -> AnchorSet {
    AnchorSet {
        scores: vec![0.0; ids.len()],
        word_ids: ids,
        method: AnchorMethod::HullTsne,
        hull_dim: Some(3),
    }
}

fn columns(rng: &mut ChaCha8Rng, v: usize, k: usize) -> Array2<f64> {
    let mut a = Array2::from_shape_simple_fn((v, k), || rng.random::<f64>() + 1e-3);
    for mut c in a.columns_mut() {
        let s = c.sum();
        c.mapv_inplace(|x| x / s);
    }
    a
}

#[test]
fn recovery_error_of_an_offset_word() {
    let qbar = array![
        [0.6, 0.2, 0.2, 0.0],
        [0.0, 0.1, 0.3, 0.6],
        [0.18, 0.13, 0.27, 0.42],
        [0.33, 0.15, 0.25, 0.27],
    ];
    // Row 2 is 0.3·row0 + 0.7·row1; row 3 is the midpoint plus δ.
    let delta = [0.03, 0.0, 0.0, -0.03];
    let c = array![[1.0, 0.0], [0.0, 1.0], [0.3, 0.7], [0.5, 0.5]];
    let model = TopicModel {
        a: Array2::zeros((4, 2)),
        c,
        anchors: anchors(vec![0, 1]),
        p_w: vec![0.25; 4],
        diagnostics: SolverDiagnostics {
            objective: vec![0.0; 4],
            iterations: vec![0; 4],
            converged: vec![true; 4],
            excluded: vec![],
        },
    };
    let mid: Vec<f64> = (0..4)
        .map(|j| 0.5 * qbar[[0, j]] + 0.5 * qbar[[1, j]] + delta[j])
        .collect();
    for j in 0..4 {
        assert_abs_diff_eq!(qbar[[3, j]], mid[j], epsilon = 1e-15);
    }
    let norm_delta = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert_abs_diff_eq!(
        recovery_error(qbar.view(), &model).unwrap(),
        norm_delta / 4.0,
        epsilon = 1e-15
    );
}

#[test]
fn entropy_examples() {
    let c = array![[0.5, 0.5, 0.0]];
    assert_abs_diff_eq!(
        normalized_entropy(c.view()).unwrap(),
        2f64.ln() / 3f64.ln(),
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(2f64.ln() / 3f64.ln(), 0.6309, epsilon = 1e-4);
    let with_excluded = array![[0.5, 0.5, 0.0], [0.0, 0.0, 0.0]];
    assert_eq!(
        normalized_entropy(with_excluded.view()).unwrap(),
        normalized_entropy(c.view()).unwrap()
    );
    assert!(matches!(
        normalized_entropy(array![[1.0]].view()),
        Err(Error::UndefinedForK1)
    ));
}

#[test]
fn kl_and_specificity_examples() {
    let want = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
    assert_abs_diff_eq!(kl([0.5, 0.5], [0.25, 0.75]), want, epsilon = 1e-15);
    let a = array![[0.5, 0.25], [0.5, 0.75]];
    let ts = specificity(a.view(), &[0.25, 0.75]).unwrap();
    assert_abs_diff_eq!(ts.value, want / 2.0, epsilon = 1e-15);
    let inf = specificity(array![[0.5], [0.5]].view(), &[1.0, 0.0]).unwrap();
    assert!(inf.infinite && inf.value.is_infinite());
}

#[test]
fn single_topic_model_is_unspecific() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = Array2::from_shape_simple_fn((10, 10), || rng.random::<f64>());
    let mut q = b.dot(&b.t());
    let s = q.sum();
    q.mapv_inplace(|x| x / s);
    let stats = CooccurrenceStats::from_qhat(q);
    let model = recover_model(&stats, &anchors(vec![3]), 1, &SolverConfig::default()).unwrap();
    assert_abs_diff_eq!(
        specificity(model.a.view(), &stats.p_w).unwrap().value,
        0.0,
        epsilon = 1e-12
    );
}

#[test]
fn coherence_examples() {
    let d = 6;
    let all: Vec<Document> = (0..d).map(|_| Document::from_tokens(vec![0, 1, 2])).collect();
    let a = array![[0.5], [0.4], [0.1]];
    let tc = coherence(a.view(), &all, 2, 1.0).unwrap();
    assert_abs_diff_eq!(
        tc.per_topic[0],
        2.0 * ((d as f64 + 1.0) / d as f64).ln(),
        epsilon = 1e-14
    );

    // Word 0 in ten documents, word 1 in five, never together.
    let mut docs: Vec<Document> = (0..10).map(|_| Document::from_tokens(vec![0, 2])).collect();
    docs.extend((0..5).map(|_| Document::from_tokens(vec![1, 2])));
    let tc = coherence(a.view(), &docs, 2, 1.0).unwrap();
    assert_abs_diff_eq!(
        tc.per_topic[0],
        (1.0f64 / 10.0).ln() + (1.0f64 / 5.0).ln(),
        epsilon = 1e-14
    );
}

#[test]
fn coherence_flags_unseen_top_words() {
    let docs: Vec<Document> = (0..4).map(|_| Document::from_tokens(vec![0, 1])).collect();
    let a = array![[0.6, 0.1], [0.3, 0.2], [0.1, 0.7]];
    let tc = coherence(a.view(), &docs, 2, 1.0).unwrap();
    assert_eq!(tc.flagged, [1]);
    assert_eq!(tc.mean, tc.per_topic[0]);
}

#[test]
fn anchor_rank_examples() {
    let e = std::f64::consts::E;
    let a = array![[0.5, 0.5 / e], [0.5 / e, 0.5], [0.5 - 0.5 / e, 0.5 - 0.5 / e]];
    let ranks = anchor_ranks(a.view(), &anchors(vec![1, 0])).unwrap();
    assert_abs_diff_eq!(ranks.soft, 1.0, epsilon = 1e-12);

    let col = array![[0.4], [0.1], [0.3], [0.15], [0.05]];
    let ranks = anchor_ranks(col.view(), &anchors(vec![3])).unwrap();
    assert_eq!(ranks.hard, [2]);
    let top = anchor_ranks(col.view(), &anchors(vec![0])).unwrap();
    assert_eq!((top.hard[0], top.soft), (0, 0.0));
}

#[test]
fn smoothing_example() {
    let a = array![[0.0, 0.4], [0.5, 0.0], [0.5, 0.6]];
    let s = smooth_anchors(a.view(), &[0], 1e-5).unwrap();
    let z = 1.0 + 1e-5;
    assert_abs_diff_eq!(s[[0, 0]], 1e-5 / z, epsilon = 1e-18);
    assert_abs_diff_eq!(s[[1, 0]], 0.5 / z, epsilon = 1e-15);
    assert_eq!(s[[1, 1]], 0.0);
    assert_abs_diff_eq!(s[[0, 1]], 0.4, epsilon = 1e-15);
    let untouched = smooth_anchors(a.view(), &[2], 1e-5).unwrap();
    assert_eq!(untouched, a);
}

#[test]
fn single_token_documents_have_closed_form() {
    let a: Array2<f64> = array![[0.5, 0.1, 0.2], [0.3, 0.6, 0.1], [0.2, 0.3, 0.7]];
    let docs: Vec<Document> = [0u32, 2, 1, 2]
        .iter()
        .map(|&w| Document::from_tokens(vec![w]))
        .collect();
    let want: f64 = [0usize, 2, 1, 2].iter().map(|&w| (a.row(w).sum() / 3.0).ln()).sum();
    let got = heldout_loglik(a.view(), &docs, 0.1, 3, 10).unwrap();
    assert_abs_diff_eq!(got.total, want, epsilon = 1e-12);
    assert_eq!((got.tokens, got.oov_tokens), (4, 0));
}

#[test]
fn unknown_tokens_are_skipped() {
    let a = array![[0.5, 0.5], [0.5, 0.5], [0.0, 0.0]];
    let docs = [Document::from_tokens(vec![0, 2, 7, 1])];
    let got = heldout_loglik(a.view(), &docs, 0.1, 0, 5).unwrap();
    assert_eq!((got.tokens, got.oov_tokens), (2, 2));
    assert_abs_diff_eq!(got.total, 2.0 * 0.5f64.ln(), epsilon = 1e-12);
}

#[test]
fn more_particles_reduce_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Peaked topics make the first particle draws matter.
    let mut a = columns(&mut rng, 30, 4).mapv(|x| x.powi(3));
    for mut c in a.columns_mut() {
        let s = c.sum();
        c.mapv_inplace(|x| x / s);
    }
    let doc: Vec<u32> = (0..40).map(|_| rng.random_range(0..30)).collect();
    let spread = |particles: usize| {
        let xs: Vec<f64> = (0..10)
            .map(|s| {
                let mut r = ChaCha8Rng::seed_from_u64(s);
                document_loglik(a.view(), &doc, 0.1, particles, &mut r).0
            })
            .collect();
        let m = xs.iter().sum::<f64>() / 10.0;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 9.0).sqrt()
    };
    let (one, ten) = (spread(1), spread(10));
    assert!(ten < one, "std {one} with 1 particle, {ten} with 10");
}

#[test]
fn heldout_is_reproducible_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = columns(&mut rng, 20, 3);
    let docs: Vec<Document> = (0..40)
        .map(|_| Document::from_tokens((0..15).map(|_| rng.random_range(0..20)).collect()))
        .collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| heldout_loglik(a.view(), &docs, 0.1, 9, 10).unwrap())
    };
    assert_eq!(run(1).total.to_bits(), run(6).total.to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_is_normalized(seed in any::<u64>(), v in 1usize..20, k in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = columns(&mut rng, k, v).reversed_axes();
        let ne = normalized_entropy(c.view()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&ne));
    }

    #[test]
    fn dissimilarity_matches_brute_force_and_ignores_order(seed in any::<u64>(), v in 2usize..15, k in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = columns(&mut rng, v, k);
        let mut want: f64 = 0.0;
        for t in 0..k {
            let d: f64 = (0..v)
                .map(|w| ((0..k).map(|u| a[[w, u]]).sum::<f64>() / k as f64 - a[[w, t]]).powi(2))
                .sum::<f64>()
                .sqrt();
            want = want.max(d);
        }
        let got = dissimilarity(a.view()).unwrap();
        prop_assert!((got - want).abs() < 1e-14);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.rotate_left(seed as usize % k);
        let shuffled = a.select(ndarray::Axis(1), &perm);
        prop_assert!((dissimilarity(shuffled.view()).unwrap() - got).abs() < 1e-15);
    }

    #[test]
    fn specificity_vanishes_only_at_the_marginal(seed in any::<u64>(), v in 2usize..15, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = columns(&mut rng, v, 1).column(0).to_vec();
        let same = Array2::from_shape_fn((v, k), |(w, _)| p[w]);
        prop_assert!(specificity(same.view(), &p).unwrap().value.abs() < 1e-12);
        let other = columns(&mut rng, v, k);
        prop_assert!(specificity(other.view(), &p).unwrap().value > 0.0);
    }

    #[test]
    fn coherence_ignores_column_scale(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = columns(&mut rng, 12, k);
        let docs: Vec<Document> = (0..30)
            .map(|_| Document::from_tokens((0..8).map(|_| rng.random_range(0..12)).collect()))
            .collect();
        let scales: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..100.0)).collect();
        let scaled = Array2::from_shape_fn((12, k), |(w, t)| a[[w, t]] * scales[t]);
        let x = coherence(a.view(), &docs, 5, 1.0).unwrap();
        let y = coherence(scaled.view(), &docs, 5, 1.0).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn heldout_is_bit_reproducible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = columns(&mut rng, 10, 3);
        let docs: Vec<Document> = (0..5)
            .map(|_| Document::from_tokens((0..6).map(|_| rng.random_range(0..10)).collect()))
            .collect();
        let x = heldout_loglik(a.view(), &docs, 0.1, seed, 4).unwrap();
        let y = heldout_loglik(a.view(), &docs, 0.1, seed, 4).unwrap();
        prop_assert_eq!(x.total.to_bits(), y.total.to_bits());
    }
}
