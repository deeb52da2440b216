//! Word-word co-occurrence statistics.
//!
//! Each training document `d` with count vector `H_d` and length `n_d`
//! contributes `(H_d H_dᵀ - diag(H_d)) / (n_d (n_d - 1))`, the empirical
//! distribution over ordered pairs of distinct token positions. `Q̂` is the
//! uniform average of those contributions, so its entries sum to one.

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::corpus::Document;
use crate::{Error, Result};

/// Above this vocabulary size dense `V x V` storage gets expensive.
pub const DENSE_VOCAB_WARNING: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    pub qhat: Array2<f64>,
    /// Row sums of `qhat`, the word marginal `p(w)`.
    pub p_w: Vec<f64>,
    /// `qhat` with every nonzero row divided by its sum.
    pub qbar: Array2<f64>,
    /// Words whose `qhat` row sums to zero; their `qbar` rows stay zero.
    pub zero_rows: Vec<usize>,
}

impl CooccurrenceStats {
    pub fn vocab_size(&self) -> usize {
        self.p_w.len()
    }

    pub fn from_qhat(qhat: Array2<f64>) -> Self {
        let (qbar, p_w, zero_rows) = row_normalize(&qhat);
        CooccurrenceStats {
            qhat,
            p_w,
            qbar,
            zero_rows,
        }
    }

    pub fn is_zero_row(&self, word: usize) -> bool {
        self.zero_rows.binary_search(&word).is_ok()
    }
}

fn check_documents(docs: &[Document], vocab_size: usize) -> Result<()> {
    if docs.is_empty() {
        return Err(Error::invalid("no training documents"));
    }
    for (index, d) in docs.iter().enumerate() {
        if d.len() < 2 {
            return Err(Error::DegenerateDocument { index, length: d.len() });
        }
        if let Some(&(id, _)) = d.counts().last() {
            if id as usize >= vocab_size {
                return Err(Error::invalid(format!(
                    "document {index} references word {id} outside vocabulary of {vocab_size}"
                )));
            }
        }
    }
    Ok(())
}

fn document_weight(d: &Document, n_docs: usize) -> f64 {
    let n = d.len() as f64;
    1.0 / (n * (n - 1.0) * n_docs as f64)
}

fn pair_count(ci: u32, cj: u32, same: bool) -> f64 {
    let (ci, cj) = (ci as f64, cj as f64);
    if same {
        ci * cj - ci
    } else {
        ci * cj
    }
}

/// Builds `Q̂` from training documents, one row per worker.
///
/// Every entry accumulates its per-document terms in document order, so the
/// result is bit-identical to [`build_qhat_serial`] whatever the thread count.
pub fn build_qhat(documents: &[Document], vocab_size: usize) -> Result<CooccurrenceStats> {
    check_documents(documents, vocab_size)?;
    if vocab_size > DENSE_VOCAB_WARNING {
        log::warn!(
            "vocabulary of {vocab_size} words exceeds {DENSE_VOCAB_WARNING}; dense Q needs {:.1} GiB",
            (vocab_size * vocab_size * 8) as f64 / (1u64 << 30) as f64
        );
    }
    let n_docs = documents.len();

    // Inverted index: word -> [(document, count)] in document order.
    let mut postings: Vec<Vec<(usize, u32)>> = vec![Vec::new(); vocab_size];
    for (di, d) in documents.iter().enumerate() {
        for &(id, c) in d.counts() {
            postings[id as usize].push((di, c));
        }
    }
    let weights: Vec<f64> = documents.iter().map(|d| document_weight(d, n_docs)).collect();

    let mut qhat = Array2::<f64>::zeros((vocab_size, vocab_size));
    qhat.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(vocab_size)
        .enumerate()
        .for_each(|(i, row)| {
            for &(di, ci) in &postings[i] {
                let w = weights[di];
                for &(j, cj) in documents[di].counts() {
                    row[j as usize] += pair_count(ci, cj, i == j as usize) * w;
                }
            }
        });
    Ok(CooccurrenceStats::from_qhat(qhat))
}

/// Single-threaded reference accumulation in document order.
pub fn build_qhat_serial(documents: &[Document], vocab_size: usize) -> Result<CooccurrenceStats> {
    check_documents(documents, vocab_size)?;
    let n_docs = documents.len();
    let mut qhat = Array2::<f64>::zeros((vocab_size, vocab_size));
    for d in documents {
        let w = document_weight(d, n_docs);
        for &(i, ci) in d.counts() {
            for &(j, cj) in d.counts() {
                qhat[[i as usize, j as usize]] += pair_count(ci, cj, i == j) * w;
            }
        }
    }
    Ok(CooccurrenceStats::from_qhat(qhat))
}

/// Returns `(qbar, p_w, zero_rows)`.
pub fn row_normalize(qhat: &Array2<f64>) -> (Array2<f64>, Vec<f64>, Vec<usize>) {
    let p_w: Vec<f64> = qhat.rows().into_iter().map(|r| r.sum()).collect();
    let mut qbar = qhat.clone();
    let mut zero_rows = Vec::new();
    for (i, mut row) in qbar.axis_iter_mut(Axis(0)).enumerate() {
        if p_w[i] > 0.0 {
            row.mapv_inplace(|x| x / p_w[i]);
        } else {
            zero_rows.push(i);
        }
    }
    (qbar, p_w, zero_rows)
}
