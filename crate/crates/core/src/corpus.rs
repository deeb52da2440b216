//! Tokenization, vocabulary curation and the train/held-out split.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Parses a stopword file: one token per line, blank lines and `#` comments ignored.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    pub stopwords: BTreeSet<String>,
    pub min_corpus_freq: u64,
    pub min_doc_length: usize,
    pub anchor_min_doc_freq: u64,
    pub holdout_frac: f64,
    pub seed: u64,
    /// Drop tokens made only of digits.
    pub drop_numeric: bool,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            stopwords: default_stopwords(),
            min_corpus_freq: 100,
            min_doc_length: 10,
            anchor_min_doc_freq: 3,
            holdout_frac: 0.05,
            seed: 0,
            drop_numeric: true,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_corpus_freq == 0 || self.min_doc_length == 0 || self.anchor_min_doc_freq == 0 {
            return Err(Error::invalid("curation thresholds must be positive"));
        }
        if !(0.0..1.0).contains(&self.holdout_frac) {
            return Err(Error::invalid(format!(
                "holdout fraction {} outside [0, 1)",
                self.holdout_frac
            )));
        }
        Ok(())
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(raw: &str, config: &CurationConfig) -> Vec<String> {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !(config.drop_numeric && t.chars().all(|c| c.is_numeric())))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    tokens: Vec<String>,
    corpus_freq: Vec<u64>,
    doc_freq: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyData {
    tokens: Vec<String>,
    corpus_freq: Vec<u64>,
    doc_freq: Vec<u64>,
}

impl TryFrom<VocabularyData> for Vocabulary {
    type Error = Error;

    fn try_from(d: VocabularyData) -> Result<Self> {
        Vocabulary::new(d.tokens, d.corpus_freq, d.doc_freq)
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData {
            tokens: v.tokens,
            corpus_freq: v.corpus_freq,
            doc_freq: v.doc_freq,
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens && self.corpus_freq == other.corpus_freq && self.doc_freq == other.doc_freq
    }
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, corpus_freq: Vec<u64>, doc_freq: Vec<u64>) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            what: "vocabulary".into(),
            reason,
        };
        if tokens.len() != corpus_freq.len() || tokens.len() != doc_freq.len() {
            return Err(bad("length mismatch".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(bad(format!("empty token at id {i}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(bad(format!("duplicate token {t:?}")));
            }
            if !(corpus_freq[i] >= doc_freq[i] && doc_freq[i] >= 1) {
                return Err(bad(format!("inconsistent frequencies for {t:?}")));
            }
        }
        Ok(Vocabulary {
            tokens,
            corpus_freq,
            doc_freq,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn corpus_freq(&self) -> &[u64] {
        &self.corpus_freq
    }

    pub fn doc_freq(&self) -> &[u64] {
        &self.doc_freq
    }
}

/// A bag of words that remembers token order (the held-out estimator walks it left to right).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DocumentData", into = "DocumentData")]
pub struct Document {
    tokens: Vec<u32>,
    counts: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct DocumentData {
    counts: Vec<(u32, u32)>,
    tokens: Vec<u32>,
}

impl TryFrom<DocumentData> for Document {
    type Error = Error;

    fn try_from(d: DocumentData) -> Result<Self> {
        let doc = Document::from_tokens(d.tokens);
        if doc.counts != d.counts {
            return Err(Error::Format {
                what: "document".into(),
                reason: "counts disagree with token sequence".into(),
            });
        }
        Ok(doc)
    }
}

impl From<Document> for DocumentData {
    fn from(d: Document) -> Self {
        DocumentData {
            counts: d.counts,
            tokens: d.tokens,
        }
    }
}

impl Document {
    pub fn from_tokens(tokens: Vec<u32>) -> Self {
        let mut sorted = tokens.clone();
        sorted.sort_unstable();
        let mut counts: Vec<(u32, u32)> = Vec::new();
        for id in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == id => *c += 1,
                _ => counts.push((id, 1)),
            }
        }
        Document { tokens, counts }
    }

    /// Builds a document from (word id, count) pairs; tokens are laid out in id order.
    pub fn from_counts(pairs: &[(u32, u32)]) -> Self {
        let tokens = pairs
            .iter()
            .flat_map(|&(id, c)| std::iter::repeat_n(id, c as usize))
            .collect();
        Document::from_tokens(tokens)
    }

    /// Sparse counts sorted by word id, zero counts omitted.
    pub fn counts(&self) -> &[(u32, u32)] {
        &self.counts
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub heldout: Vec<Document>,
    /// Positions of the held-out documents in the curated corpus, ascending.
    pub heldout_indices: Vec<usize>,
    pub seed: u64,
}

/// Applies stopword removal, the corpus-frequency cutoff and the document-length
/// filter until none of them changes the corpus, then assigns word ids by
/// descending corpus frequency with lexicographic tie-breaking.
pub fn curate(raw_corpus: &[Vec<String>], config: &CurationConfig) -> Result<(Vocabulary, Vec<Document>)> {
    config.validate()?;
    if raw_corpus.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let mut docs: Vec<Vec<&str>> = raw_corpus
        .iter()
        .map(|d| {
            d.iter()
                .map(String::as_str)
                .filter(|t| !config.stopwords.contains(*t))
                .collect()
        })
        .collect();

    // Dropping short documents can push a word back under the frequency cutoff.
    loop {
        let before: usize = docs.iter().map(Vec::len).sum::<usize>() + docs.len();
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for d in &docs {
            for t in d {
                *freq.entry(t).or_default() += 1;
            }
        }
        docs = docs
            .into_iter()
            .map(|d| {
                d.into_iter()
                    .filter(|t| freq[t] >= config.min_corpus_freq)
                    .collect::<Vec<_>>()
            })
            .filter(|d| d.len() >= config.min_doc_length)
            .collect();
        let after: usize = docs.iter().map(Vec::len).sum::<usize>() + docs.len();
        if after == before {
            break;
        }
    }

    let mut freq: HashMap<&str, (u64, u64)> = HashMap::new();
    for d in &docs {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for t in d {
            let e = freq.entry(t).or_default();
            e.0 += 1;
            if seen.insert(t) {
                e.1 += 1;
            }
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut words: Vec<(&str, u64, u64)> = freq.into_iter().map(|(t, (c, d))| (t, c, d)).collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let vocab = Vocabulary::new(
        words.iter().map(|w| w.0.to_string()).collect(),
        words.iter().map(|w| w.1).collect(),
        words.iter().map(|w| w.2).collect(),
    )?;
    let documents = docs
        .iter()
        .map(|d| Document::from_tokens(d.iter().map(|t| vocab.index[*t] as u32).collect()))
        .collect();
    Ok((vocab, documents))
}

/// Per-word document frequency over `documents`.
pub fn document_frequencies(documents: &[Document], vocab_size: usize) -> Vec<u64> {
    let mut df = vec![0u64; vocab_size];
    for d in documents {
        for &(id, _) in d.counts() {
            df[id as usize] += 1;
        }
    }
    df
}

/// `mask[w]` is true iff `w` occurs in more than `anchor_min_doc_freq` of `documents`.
pub fn anchor_candidate_mask(vocab: &Vocabulary, documents: &[Document], config: &CurationConfig) -> Vec<bool> {
    document_frequencies(documents, vocab.len())
        .into_iter()
        .map(|df| df > config.anchor_min_doc_freq)
        .collect()
}

/// Number of held-out documents for `n` documents: `floor(frac * n)`.
pub fn heldout_count(n: usize, frac: f64) -> usize {
    // The epsilon keeps exact products such as 0.29 * 100 from rounding down.
    ((frac * n as f64) + 1e-9).floor() as usize
}

pub fn split_heldout(documents: Vec<Document>, holdout_frac: f64, seed: u64) -> Result<CorpusSplit> {
    if documents.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    if !(0.0..1.0).contains(&holdout_frac) {
        return Err(Error::invalid(format!(
            "holdout fraction {holdout_frac} outside [0, 1)"
        )));
    }
    let n = documents.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut heldout_indices = order[..heldout_count(n, holdout_frac)].to_vec();
    heldout_indices.sort_unstable();

    let mut is_heldout = vec![false; n];
    for &i in &heldout_indices {
        is_heldout[i] = true;
    }
    let mut train = Vec::with_capacity(n - heldout_indices.len());
    let mut heldout = Vec::with_capacity(heldout_indices.len());
    for (i, d) in documents.into_iter().enumerate() {
        if is_heldout[i] {
            heldout.push(d);
        } else {
            train.push(d);
        }
    }
    Ok(CorpusSplit {
        train,
        heldout,
        heldout_indices,
        seed,
    })
}
