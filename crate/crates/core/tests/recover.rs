use anchorhull::recover::{recover_model, recover_topic_word, solve_simplex_coeffs};
use anchorhull::{AnchorMethod, AnchorSet, CooccurrenceStats, Error, SolverConfig};
use approx::assert_abs_diff_eq;
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_rows(rng: &mut ChaCha8Rng, k: usize, v: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_simple_fn((k, v), || rng.random::<f64>().powi(3));
    for mut r in m.rows_mut() {
        let s = r.sum();
        r.mapv_inplace(|x| x / s);
    }
    m
}

fn random_stats(rng: &mut ChaCha8Rng, v: usize) -> CooccurrenceStats {
    let b = Array2::from_shape_simple_fn((v, v), || rng.random::<f64>());
    let mut q = b.dot(&b.t());
    let s = q.sum();
    q.mapv_inplace(|x| x / s);
    CooccurrenceStats::from_qhat(q)
}

fn anchor_set(ids: Vec<usize>) -> AnchorSet {
    AnchorSet {
        scores: vec![0.0; ids.len()],
        word_ids: ids,
        method: AnchorMethod::Greedy,
        hull_dim: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coefficients_stay_on_the_simplex(seed in any::<u64>(), k in 1usize..8, v in 8usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(&mut rng, k, v);
        let target = random_rows(&mut rng, 1, v).row(0).to_owned();
        let sol = solve_simplex_coeffs(target.view(), rows.view(), &SolverConfig::default()).unwrap();
        prop_assert_eq!(sol.coeffs.len(), k);
        prop_assert!(sol.coeffs.iter().all(|&c| c >= 0.0));
        prop_assert!((sol.coeffs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for w in sol.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
        let fit = rows.t().dot(&Array1::from(sol.coeffs.clone()));
        let direct = 0.5 * (&target - &fit).mapv(|x| x * x).sum();
        prop_assert!((sol.objective - direct).abs() < 1e-15);
    }

    #[test]
    fn planted_mixtures_are_recovered(seed in any::<u64>(), k in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Disjoint supports keep the anchor rows linearly independent.
        let v = 6 * k;
        let mut rows = Array2::<f64>::zeros((k, v));
        for i in 0..k {
            for j in 0..6 {
                rows[[i, 6 * i + j]] = rng.random_range(0.1..1.0);
            }
            let s = rows.row(i).sum();
            rows.row_mut(i).mapv_inplace(|x| x / s);
        }
        let mut c: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = c.iter().sum();
        c.iter_mut().for_each(|x| *x /= s);
        let target = rows.t().dot(&Array1::from(c.clone()));
        let sol = solve_simplex_coeffs(target.view(), rows.view(), &SolverConfig::default()).unwrap();
        for (a, b) in sol.coeffs.iter().zip(&c) {
            prop_assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn bayes_inversion_matches_direct_normalization(seed in any::<u64>(), k in 1usize..6, v in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_rows(&mut rng, v, k);
        let p = random_rows(&mut rng, 1, v).row(0).to_vec();
        let a = recover_topic_word(c.view(), &p).unwrap();
        for t in 0..k {
            let z: f64 = (0..v).map(|w| c[[w, t]] * p[w]).sum();
            for w in 0..v {
                prop_assert!((a[[w, t]] - c[[w, t]] * p[w] / z).abs() < 1e-14);
            }
            prop_assert!((a.column(t).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn anchors_are_separable(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = random_stats(&mut rng, 12);
        let ids: Vec<usize> = (0..k).map(|i| (5 * i + 3) % 12).collect();
        let model = recover_model(&stats, &anchor_set(ids.clone()), k, &SolverConfig::default()).unwrap();
        for (t, &s) in ids.iter().enumerate() {
            for t2 in 0..k {
                let want = if t == t2 { 1.0 } else { 0.0 };
                prop_assert_eq!(model.c[[s, t2]], want);
                if t2 != t {
                    prop_assert_eq!(model.a[[s, t2]], 0.0);
                }
            }
        }
        for row in model.c.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn uniform_and_identity_inversions() {
    let p = [0.1, 0.2, 0.3, 0.4];
    let uniform = Array2::from_elem((4, 2), 0.5);
    let a = recover_topic_word(uniform.view(), &p).unwrap();
    for col in a.columns() {
        for (x, y) in col.iter().zip(&p) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-15);
        }
    }
    let eye = Array2::<f64>::eye(4);
    assert_eq!(recover_topic_word(eye.view(), &p).unwrap(), eye);
}

#[test]
fn single_topic_is_the_marginal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let stats = random_stats(&mut rng, 9);
    let model = recover_model(&stats, &anchor_set(vec![4, 2]), 1, &SolverConfig::default()).unwrap();
    assert_eq!(model.num_topics(), 1);
    assert_eq!(model.anchors.word_ids, [4]);
    for (a, p) in model.a.column(0).iter().zip(&stats.p_w) {
        assert_abs_diff_eq!(*a, *p, epsilon = 1e-15);
    }
}

#[test]
fn zero_rows_are_excluded() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = Array2::from_shape_simple_fn((6, 6), || rng.random::<f64>());
    let mut q = b.dot(&b.t());
    for i in 0..6 {
        q[[2, i]] = 0.0;
        q[[i, 2]] = 0.0;
    }
    let s = q.sum();
    q.mapv_inplace(|x| x / s);
    let stats = CooccurrenceStats::from_qhat(q);
    let model = recover_model(&stats, &anchor_set(vec![0, 5]), 2, &SolverConfig::default()).unwrap();
    assert_eq!(model.diagnostics.excluded, [2]);
    assert!(model.c.row(2).iter().all(|&x| x == 0.0));
    assert!(model.a.row(2).iter().all(|&x| x == 0.0));
    assert!(matches!(
        recover_model(&stats, &anchor_set(vec![2, 5]), 2, &SolverConfig::default()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn too_many_topics() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stats = random_stats(&mut rng, 5);
    assert!(matches!(
        recover_model(&stats, &anchor_set(vec![0, 1]), 3, &SolverConfig::default()),
        Err(Error::KTooLarge {
            requested: 3,
            available: 2
        })
    ));
}

#[test]
fn result_does_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let stats = random_stats(&mut rng, 60);
    let set = anchor_set(vec![1, 7, 13, 29, 41, 58]);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| recover_model(&stats, &set, 6, &SolverConfig::default()).unwrap())
    };
    let (one, many) = (run(1), run(4));
    let bits = |m: &Array2<f64>| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one.a), bits(&many.a));
    assert_eq!(bits(&one.c), bits(&many.c));
    assert_eq!(one.diagnostics, many.diagnostics);
    assert!(one.a.sum_axis(Axis(0)).iter().all(|s| (s - 1.0).abs() < 1e-12));
}
