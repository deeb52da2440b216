use std::collections::BTreeSet;

use anchorhull::cooccur::{build_qhat, build_qhat_serial};
use anchorhull::corpus::{curate, heldout_count, split_heldout, tokenize};
use anchorhull::io::read_raw_corpus;
use anchorhull::{CurationConfig, Document, Error};
use ndarray::Array2;
use proptest::prelude::*;

/// Averages, over documents, the indicator counts of every ordered pair of
/// distinct token positions divided by the number of such pairs.
fn position_pairs(docs: &[Vec<u32>], v: usize) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((v, v));
    for d in docs {
        let n = d.len() as f64;
        for (i, &a) in d.iter().enumerate() {
            for (j, &b) in d.iter().enumerate() {
                if i != j {
                    q[[a as usize, b as usize]] += 1.0 / (n * (n - 1.0)) / docs.len() as f64;
                }
            }
        }
    }
    q
}

fn corpus_strategy() -> impl Strategy<Value = (usize, Vec<Vec<u32>>)> {
    (2usize..12).prop_flat_map(|v| {
        let doc = prop::collection::vec(0..v as u32, 2..25);
        (Just(v), prop::collection::vec(doc, 1..15))
    })
}

proptest! {
    #[test]
    fn qhat_matches_position_pairs((v, docs) in corpus_strategy()) {
        let documents: Vec<Document> = docs.iter().cloned().map(Document::from_tokens).collect();
        let stats = build_qhat(&documents, v).unwrap();
        let want = position_pairs(&docs, v);
        for (a, b) in stats.qhat.iter().zip(want.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn qhat_is_a_symmetric_distribution((v, docs) in corpus_strategy()) {
        let documents: Vec<Document> = docs.into_iter().map(Document::from_tokens).collect();
        let stats = build_qhat(&documents, v).unwrap();
        prop_assert!((stats.qhat.sum() - 1.0).abs() < 1e-9);
        prop_assert!(stats.qhat.iter().all(|&x| x >= 0.0));
        for i in 0..v {
            for j in 0..v {
                prop_assert_eq!(stats.qhat[[i, j]], stats.qhat[[j, i]]);
            }
        }
    }

    #[test]
    fn row_normalization((v, docs) in corpus_strategy()) {
        let documents: Vec<Document> = docs.into_iter().map(Document::from_tokens).collect();
        let stats = build_qhat(&documents, v).unwrap();
        for w in 0..v {
            let row_sum: f64 = stats.qhat.row(w).sum();
            prop_assert!((stats.p_w[w] - row_sum).abs() < 1e-15);
            if stats.is_zero_row(w) {
                prop_assert_eq!(row_sum, 0.0);
                prop_assert!(stats.qbar.row(w).iter().all(|&x| x == 0.0));
            } else {
                prop_assert!((stats.qbar.row(w).sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parallel_build_is_bit_identical((v, docs) in corpus_strategy()) {
        let documents: Vec<Document> = docs.into_iter().map(Document::from_tokens).collect();
        let par = build_qhat(&documents, v).unwrap();
        let ser = build_qhat_serial(&documents, v).unwrap();
        prop_assert!(par.qhat.iter().zip(ser.qhat.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn curation_is_a_fixed_point(
        docs in prop::collection::vec(prop::collection::vec(0usize..15, 0..20), 1..30),
        min_freq in 1u64..6,
        min_len in 1usize..6,
    ) {
        let raw: Vec<Vec<String>> = docs
            .iter()
            .map(|d| d.iter().map(|w| format!("w{w}")).collect())
            .collect();
        let config = CurationConfig {
            stopwords: BTreeSet::new(),
            min_corpus_freq: min_freq,
            min_doc_length: min_len,
            ..CurationConfig::default()
        };
        match curate(&raw, &config) {
            Err(Error::EmptyVocabulary) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
            Ok((vocab, documents)) => {
                prop_assert!(documents.iter().all(|d| d.len() >= min_len));
                prop_assert!(vocab.corpus_freq().iter().all(|&f| f >= min_freq));
                prop_assert!(vocab.corpus_freq().windows(2).all(|w| w[0] >= w[1]));
                let again: Vec<Vec<String>> = documents
                    .iter()
                    .map(|d| d.tokens().iter().map(|&t| vocab.token(t as usize).to_string()).collect())
                    .collect();
                let (vocab2, documents2) = curate(&again, &config).unwrap();
                prop_assert_eq!(vocab2.tokens(), vocab.tokens());
                prop_assert_eq!(documents2, documents);
            }
        }
    }

    #[test]
    fn split_partitions_documents(n in 1usize..80, frac in 0.0f64..0.9, seed in any::<u64>()) {
        let docs: Vec<Document> = (0..n as u32).map(|i| Document::from_tokens(vec![i, i])).collect();
        let split = split_heldout(docs.clone(), frac, seed).unwrap();
        prop_assert_eq!(split.heldout.len(), heldout_count(n, frac));
        prop_assert_eq!(split.train.len() + split.heldout.len(), n);
        for (i, d) in split.heldout_indices.iter().zip(&split.heldout) {
            prop_assert_eq!(&docs[*i], d);
        }
        let again = split_heldout(docs, frac, seed).unwrap();
        prop_assert_eq!(again.heldout_indices, split.heldout_indices);
    }
}

#[test]
fn documents_keep_token_order() {
    let d = Document::from_tokens(vec![3, 1, 3, 0]);
    assert_eq!(d.tokens(), &[3, 1, 3, 0]);
    assert_eq!(d.counts(), &[(0, 1), (1, 1), (3, 2)]);
}

#[test]
fn tokenizer_and_raw_reader() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.txt"), "Second doc, here!\n").unwrap();
    std::fs::write(dir.path().join("a.txt"), "first DOC\nstill first").unwrap();
    std::fs::write(dir.path().join("skip.md"), "not a document").unwrap();
    let docs = read_raw_corpus(dir.path()).unwrap();
    assert_eq!(docs.len(), 2);
    let config = CurationConfig {
        stopwords: BTreeSet::new(),
        ..CurationConfig::default()
    };
    assert_eq!(tokenize(&docs[0], &config), ["first", "doc", "still", "first"]);
    assert_eq!(tokenize(&docs[1], &config), ["second", "doc", "here"]);

    let file = dir.path().join("lines.txt");
    std::fs::write(&file, "one two\n\nthree four\n").unwrap();
    let lines = read_raw_corpus(&file).unwrap();
    assert!(lines.iter().any(|l| l.contains("three")));
}
