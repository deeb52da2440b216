//! End-to-end runs, K sweeps, multi-seed stability and plot export.

mod artifacts;
mod viz;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::AnchorMethod;
use crate::corpus::CurationConfig;
use crate::embed::TsneConfig;
use crate::io::write_json;
use crate::metrics::{evaluate, MetricsConfig, SweepRow};
use crate::recover::{recover_model, SolverConfig};
use crate::{Error, Result};

pub use artifacts::{
    candidates, select_anchors, AnchorConfig, AnchorEntry, AnchorsArtifact, ArtifactHeader, CooccurArtifact,
    CorpusArtifact, EmbedConfig, EmbeddingArtifact, IngestConfig, MetricsArtifact, ModelArtifact, RecoverConfig,
    Workspace, ANCHORS_FILE, COOCCUR_FILE, COOCCUR_MATRIX, CORPUS_FILE, EMBEDDING_FILE, EMBEDDING_MATRIX,
    FORMAT_VERSION, METRICS_FILE, MODEL_A_MATRIX, MODEL_C_MATRIX, MODEL_FILE,
};
pub use viz::{viz_export, viz_json, viz_svg, VizFormat, VizPoint, VizScene};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const STABILITY_FILE: &str = "stability.json";

pub const SWEEP_COLUMNS: [&str; 11] = [
    "k",
    "method",
    "recovery_error",
    "normalized_entropy",
    "specificity",
    "dissimilarity",
    "coherence",
    "soft_rank",
    "mean_hard_rank",
    "heldout_loglik",
    "heldout_per_token",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub work_dir: PathBuf,
    pub curation: CurationConfig,
    pub method: AnchorMethod,
    /// Embedding dimension for the hull methods.
    pub dim: usize,
    /// Random projection dimension for the greedy method.
    pub projection_dim: usize,
    pub projection_density: (f64, f64),
    pub projection_seed: u64,
    pub tsne: TsneConfig,
    pub k: usize,
    pub solver: SolverConfig,
    pub metrics: MetricsConfig,
    /// Accept upstream artifacts built from a different configuration.
    pub allow_mixed: bool,
}

impl PipelineConfig {
    pub fn new(corpus: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus: corpus.into(),
            work_dir: work_dir.into(),
            curation: CurationConfig::default(),
            method: AnchorMethod::HullTsne,
            dim: 3,
            projection_dim: 1000,
            projection_density: (0.05, 0.05),
            projection_seed: 0,
            tsne: TsneConfig::default(),
            k: 10,
            solver: SolverConfig::default(),
            metrics: MetricsConfig::default(),
            allow_mixed: false,
        }
    }

    /// Uses `seed` for the split, the embedding and the held-out estimator.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.curation.seed = seed;
        self.projection_seed = seed;
        self.tsne.seed = seed;
        self.metrics.seed = seed;
        self
    }

    pub fn embed_config(&self) -> EmbedConfig {
        match self.method {
            AnchorMethod::Greedy => EmbedConfig::RandomProjection {
                dim: self.projection_dim,
                density_pos: self.projection_density.0,
                density_neg: self.projection_density.1,
                seed: self.projection_seed,
            },
            AnchorMethod::HullPca => EmbedConfig::Pca { dim: self.dim },
            AnchorMethod::HullTsne => EmbedConfig::Tsne {
                dim: self.dim,
                tsne: self.tsne.clone(),
            },
        }
    }

    /// Greedy selection stops after `max_k` anchors; hulls keep every vertex.
    pub fn anchor_config(&self, max_k: usize) -> AnchorConfig {
        AnchorConfig {
            method: self.method,
            max_anchors: (self.method == AnchorMethod::Greedy).then_some(max_k),
        }
    }

    pub fn recover_config(&self, k: usize) -> RecoverConfig {
        RecoverConfig {
            k,
            solver: self.solver.clone(),
        }
    }

    pub fn workspace(&self) -> Result<Workspace> {
        Workspace::new(&self.work_dir, self.allow_mixed)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutputs {
    pub corpus: CorpusArtifact,
    pub cooccur: CooccurArtifact,
    pub embedding: EmbeddingArtifact,
    pub anchors: AnchorsArtifact,
    pub model: ModelArtifact,
    pub metrics: MetricsArtifact,
}

/// Corpus, co-occurrence, embedding and anchors, each reused when cached.
pub fn run_through_anchors(
    config: &PipelineConfig,
    max_k: usize,
) -> Result<(
    Workspace,
    CorpusArtifact,
    CooccurArtifact,
    EmbeddingArtifact,
    AnchorsArtifact,
)> {
    let ws = config.workspace()?;
    let corpus = ws.ingest(&config.corpus, &config.curation)?;
    let cooc = ws.cooccur(&corpus)?;
    let emb = ws.embed(&cooc, &config.embed_config())?;
    let anchors = ws.anchors(&corpus, &cooc, &emb, &config.anchor_config(max_k))?;
    Ok((ws, corpus, cooc, emb, anchors))
}

/// Runs every stage for `config.k` topics, writing each artifact to the work directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutputs> {
    let (ws, corpus, cooc, embedding, anchors) = run_through_anchors(config, config.k)?;
    let model = ws.recover(&cooc, &anchors, &config.recover_config(config.k))?;
    let metrics = ws.metrics(&corpus, &cooc, &model, &config.metrics)?;
    Ok(PipelineOutputs {
        corpus,
        cooccur: cooc,
        embedding,
        anchors,
        model,
        metrics,
    })
}

/// One metrics row per K, all from prefixes of a single anchor list.
/// Writes `sweep.csv` to the work directory.
pub fn sweep_k(config: &PipelineConfig, ks: &[usize]) -> Result<Vec<SweepRow>> {
    let rows = if ks.is_empty() {
        Vec::new()
    } else {
        let max_k = *ks.iter().max().expect("nonempty");
        let (_, corpus, cooc, _, anchors) = run_through_anchors(config, max_k)?;
        let set = anchors.anchor_set();
        ks.iter()
            .map(|&k| {
                let model = recover_model(&cooc.stats, &set, k, &config.solver).map_err(|e| e.in_stage("recover"))?;
                let report = evaluate(
                    cooc.stats.qbar.view(),
                    &model,
                    &corpus.split.train,
                    &corpus.split.heldout,
                    &config.metrics,
                )
                .map_err(|e| e.in_stage("metrics"))?;
                Ok(SweepRow::new(config.method.to_string(), &report))
            })
            .collect::<Result<Vec<_>>>()?
    };
    write_sweep_csv(&config.workspace()?.path(SWEEP_FILE), &rows)?;
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRun {
    pub seed: u64,
    /// Anchor word ids in ranking order.
    pub anchors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub method: AnchorMethod,
    pub runs: Vec<StabilityRun>,
    pub vertex_counts: Vec<usize>,
    /// `pairwise_overlap[i][j]`: anchors shared by runs `i` and `j`.
    pub pairwise_overlap: Vec<Vec<usize>>,
    /// A word counts as shared when it is an anchor in at least this many runs.
    pub min_runs: usize,
    /// Shared words, ascending by id.
    pub shared: Vec<usize>,
    pub shared_tokens: Vec<String>,
}

/// Recomputes the embedding and anchors under `n_seeds` consecutive seeds
/// starting at the configured one. Writes `stability.json`.
pub fn stability(config: &PipelineConfig, n_seeds: usize) -> Result<StabilityReport> {
    if n_seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    let ws = config.workspace()?;
    let corpus = ws.ingest(&config.corpus, &config.curation)?;
    let cooc = ws.cooccur(&corpus)?;
    let mask = candidates(&corpus, &cooc.stats);
    let base = config.embed_config();
    let base_seed = match &base {
        EmbedConfig::RandomProjection { seed, .. } => *seed,
        EmbedConfig::Pca { .. } => 0,
        EmbedConfig::Tsne { tsne, .. } => tsne.seed,
    };
    let anchor_cfg = config.anchor_config(config.k);
    let runs: Vec<StabilityRun> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let emb = base
                .with_seed(seed)
                .run(&cooc.stats.qbar)
                .map_err(|e| e.in_stage("embed"))?;
            let set = select_anchors(&anchor_cfg, &emb, &mask).map_err(|e| e.in_stage("anchors"))?;
            Ok(StabilityRun {
                seed,
                anchors: set.word_ids,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = stability_report(config.method, runs, &|w| corpus.vocabulary.token(w).to_string());
    write_json(&ws.path(STABILITY_FILE), &report)?;
    Ok(report)
}

/// Overlap statistics of several anchor runs.
pub fn stability_report(
    method: AnchorMethod,
    runs: Vec<StabilityRun>,
    token: &dyn Fn(usize) -> String,
) -> StabilityReport {
    let sets: Vec<std::collections::BTreeSet<usize>> =
        runs.iter().map(|r| r.anchors.iter().copied().collect()).collect();
    let pairwise_overlap = sets
        .iter()
        .map(|a| sets.iter().map(|b| a.intersection(b).count()).collect())
        .collect();
    let min_runs = runs.len().saturating_sub(1).max(1);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &sets {
        for &w in s {
            *counts.entry(w).or_default() += 1;
        }
    }
    let shared: Vec<usize> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_runs)
        .map(|(w, _)| w)
        .collect();
    StabilityReport {
        method,
        vertex_counts: sets.iter().map(|s| s.len()).collect(),
        runs,
        pairwise_overlap,
        min_runs,
        shared_tokens: shared.iter().map(|&w| token(w)).collect(),
        shared,
    }
}
