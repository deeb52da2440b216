//! Synthetic corpus drawn from a known separable topic model.
//!
//! Every topic owns a few anchor words that no other topic emits; the rest of
//! the vocabulary is shared with topic-specific weights. The bundled corpus in
//! `data/toy_corpus.txt` is `generate(&ToySpec::default())` rendered one
//! document per line.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::CurationConfig;

static BUNDLED: &str = include_str!("../data/toy_corpus.txt");

/// One document per line.
pub fn bundled_corpus() -> &'static str {
    BUNDLED
}

/// Curation settings suited to the bundled corpus, whose words are far rarer
/// than the defaults assume.
pub fn toy_curation() -> CurationConfig {
    CurationConfig {
        min_corpus_freq: 5,
        ..CurationConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub topics: usize,
    pub anchors_per_topic: usize,
    pub shared_words: usize,
    pub documents: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Dirichlet concentration of per-document topic proportions.
    pub doc_alpha: f64,
    /// Gamma shape of the shared-word weights within a topic.
    pub word_shape: f64,
    /// Probability mass each topic puts on its own anchors.
    pub anchor_mass: f64,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            topics: 6,
            anchors_per_topic: 3,
            shared_words: 36,
            documents: 200,
            min_len: 40,
            max_len: 80,
            doc_alpha: 0.2,
            word_shape: 0.5,
            anchor_mass: 0.3,
            seed: 20_240_611,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub words: Vec<String>,
    /// `W x K`, columns sum to one.
    pub topic_word: Array2<f64>,
    /// Anchor word indices of each topic.
    pub anchors: Vec<Vec<usize>>,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// A pronounceable, stopword-free name unique to `i` (for `i < 4900`).
pub fn word_name(i: usize) -> String {
    let syl = |s: usize| {
        let s = s % (CONSONANTS.len() * VOWELS.len());
        [CONSONANTS[s / VOWELS.len()] as char, VOWELS[s % VOWELS.len()] as char]
    };
    let n = CONSONANTS.len() * VOWELS.len();
    let a = i % n;
    let b = (i / n + 3 * a) % n;
    let mut w: String = syl(a).iter().chain(syl(b).iter()).collect();
    w.push('n');
    w
}

fn gamma_weights(rng: &mut ChaCha8Rng, shape: f64, n: usize) -> Vec<f64> {
    let g = Gamma::new(shape, 1.0).expect("positive shape");
    let mut w: Vec<f64> = (0..n).map(|_| g.sample(rng).max(1e-12)).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// Samples the model and `spec.documents` raw documents.
pub fn generate(spec: &ToySpec) -> (ToyModel, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.topics;
    let n_anchor = k * spec.anchors_per_topic;
    let w = n_anchor + spec.shared_words;
    let words: Vec<String> = (0..w).map(word_name).collect();

    let mut topic_word = Array2::<f64>::zeros((w, k));
    let mut anchors = Vec::with_capacity(k);
    for t in 0..k {
        let ids: Vec<usize> = (0..spec.anchors_per_topic)
            .map(|j| t * spec.anchors_per_topic + j)
            .collect();
        let anchor_w = gamma_weights(&mut rng, 2.0, ids.len());
        for (&id, x) in ids.iter().zip(anchor_w) {
            topic_word[[id, t]] = spec.anchor_mass * x;
        }
        let shared = gamma_weights(&mut rng, spec.word_shape, spec.shared_words);
        for (j, x) in shared.into_iter().enumerate() {
            topic_word[[n_anchor + j, t]] = (1.0 - spec.anchor_mass) * x;
        }
        anchors.push(ids);
    }

    let mut docs = Vec::with_capacity(spec.documents);
    for _ in 0..spec.documents {
        let theta = gamma_weights(&mut rng, spec.doc_alpha, k);
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            let t = pick(&mut rng, theta.iter().copied());
            let id = pick(&mut rng, topic_word.column(t).iter().copied());
            tokens.push(words[id].as_str());
        }
        docs.push(tokens.join(" "));
    }
    (
        ToyModel {
            words,
            topic_word,
            anchors,
        },
        docs,
    )
}

fn pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, x) in weights.enumerate() {
        if x > 0.0 {
            last = i;
            if u < x {
                return i;
            }
            u -= x;
        }
    }
    last
}

/// The generated corpus as file contents, one document per line.
pub fn render(docs: &[String]) -> String {
    let mut s = docs.join("\n");
    s.push('\n');
    s
}
