//! Stage artifacts on disk.
//!
//! Every artifact carries a header with the hash of the configuration that
//! produced it, chained with the hashes of its inputs. A stage whose artifact
//! already exists with the expected hash is loaded instead of recomputed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::anchors::{exact_hull_anchors, greedy_anchors, AnchorMethod, AnchorSet};
use crate::cooccur::{build_qhat, CooccurrenceStats};
use crate::corpus::{anchor_candidate_mask, curate, split_heldout, tokenize, CorpusSplit, CurationConfig, Vocabulary};
use crate::embed::{pca_project, sparse_random_project, tsne_project, EmbedMeta, EmbedMethod, Embedding, TsneConfig};
use crate::io::{
    encode_matrix, hash_parts, read_json, read_matrix, read_raw_corpus, sha256_hex, write_json, write_matrix,
};
use crate::metrics::{evaluate, MetricsConfig, MetricsReport};
use crate::recover::{recover_model, SolverConfig, SolverDiagnostics, TopicModel};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub const CORPUS_FILE: &str = "corpus.json";
pub const COOCCUR_FILE: &str = "cooccur.json";
pub const COOCCUR_MATRIX: &str = "cooccur.bin";
pub const EMBEDDING_FILE: &str = "embedding.json";
pub const EMBEDDING_MATRIX: &str = "embedding.bin";
pub const ANCHORS_FILE: &str = "anchors.json";
pub const MODEL_FILE: &str = "model.json";
pub const MODEL_A_MATRIX: &str = "model.a.bin";
pub const MODEL_C_MATRIX: &str = "model.c.bin";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format_version: u32,
    pub stage: String,
    pub config_hash: String,
    /// Config hash of each input artifact, by stage name.
    pub upstream: BTreeMap<String, String>,
}

impl ArtifactHeader {
    pub fn new<C: Serialize>(stage: &str, config: &C, upstream: &[&ArtifactHeader]) -> Result<Self> {
        let config_json = serde_json::to_vec(config)?;
        let version = FORMAT_VERSION.to_le_bytes();
        let mut parts: Vec<(&str, &[u8])> = vec![
            ("format", &version),
            ("stage", stage.as_bytes()),
            ("config", &config_json),
        ];
        for u in upstream {
            parts.push((u.stage.as_str(), u.config_hash.as_bytes()));
        }
        Ok(ArtifactHeader {
            format_version: FORMAT_VERSION,
            stage: stage.to_string(),
            config_hash: hash_parts(parts),
            upstream: upstream
                .iter()
                .map(|u| (u.stage.clone(), u.config_hash.clone()))
                .collect(),
        })
    }
}

#[derive(Deserialize)]
struct HeaderOnly {
    header: ArtifactHeader,
}

/// Curation settings plus the content hash of the raw corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub corpus_sha256: String,
    pub curation: CurationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusArtifact {
    pub header: ArtifactHeader,
    pub config: IngestConfig,
    pub vocabulary: Vocabulary,
    pub split: CorpusSplit,
}

impl CorpusArtifact {
    /// Words occurring in more training documents than the curation threshold.
    pub fn candidate_mask(&self) -> Vec<bool> {
        anchor_candidate_mask(&self.vocabulary, &self.split.train, &self.config.curation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurArtifact {
    pub header: ArtifactHeader,
    pub stats: CooccurrenceStats,
}

#[derive(Serialize, Deserialize)]
struct CooccurFile {
    header: ArtifactHeader,
    vocab_size: usize,
    zero_rows: Vec<usize>,
    qhat_file: String,
    qhat_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EmbedConfig {
    RandomProjection {
        dim: usize,
        density_pos: f64,
        density_neg: f64,
        seed: u64,
    },
    Pca {
        dim: usize,
    },
    Tsne {
        dim: usize,
        tsne: TsneConfig,
    },
}

impl EmbedConfig {
    pub fn method(&self) -> EmbedMethod {
        match self {
            EmbedConfig::RandomProjection { .. } => EmbedMethod::RandomProjection,
            EmbedConfig::Pca { .. } => EmbedMethod::Pca,
            EmbedConfig::Tsne { .. } => EmbedMethod::Tsne,
        }
    }

    pub fn with_seed(&self, seed: u64) -> EmbedConfig {
        let mut c = self.clone();
        match &mut c {
            EmbedConfig::RandomProjection { seed: s, .. } => *s = seed,
            EmbedConfig::Pca { .. } => {}
            EmbedConfig::Tsne { tsne, .. } => tsne.seed = seed,
        }
        c
    }

    pub fn run(&self, qbar: &Array2<f64>) -> Result<Embedding> {
        match self {
            EmbedConfig::RandomProjection {
                dim,
                density_pos,
                density_neg,
                seed,
            } => sparse_random_project(qbar.view(), *dim, *density_pos, *density_neg, *seed),
            EmbedConfig::Pca { dim } => pca_project(qbar.view(), *dim),
            EmbedConfig::Tsne { dim, tsne } => Ok(tsne_project(qbar.view(), *dim, tsne)?.embedding),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingArtifact {
    pub header: ArtifactHeader,
    pub config: EmbedConfig,
    pub embedding: Embedding,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingFile {
    header: ArtifactHeader,
    config: EmbedConfig,
    method: EmbedMethod,
    seed: u64,
    dim: usize,
    meta: EmbedMeta,
    coords_file: String,
    coords_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub method: AnchorMethod,
    /// Number of greedy anchors; hull methods take every vertex.
    pub max_anchors: Option<usize>,
}

impl AnchorConfig {
    pub fn embed_method(&self) -> EmbedMethod {
        match self.method {
            AnchorMethod::Greedy => EmbedMethod::RandomProjection,
            AnchorMethod::HullPca => EmbedMethod::Pca,
            AnchorMethod::HullTsne => EmbedMethod::Tsne,
        }
    }
}

/// Anchor candidates: frequent enough and with a nonzero co-occurrence row.
pub fn candidates(corpus: &CorpusArtifact, stats: &CooccurrenceStats) -> Vec<bool> {
    let mut mask = corpus.candidate_mask();
    for &w in &stats.zero_rows {
        mask[w] = false;
    }
    mask
}

pub fn select_anchors(config: &AnchorConfig, embedding: &Embedding, mask: &[bool]) -> Result<AnchorSet> {
    if embedding.method != config.embed_method() {
        return Err(Error::invalid(format!(
            "{} anchors need a {} embedding, found {}",
            config.method,
            config.embed_method(),
            embedding.method
        )));
    }
    match config.method {
        AnchorMethod::Greedy => {
            let k = config
                .max_anchors
                .ok_or_else(|| Error::invalid("greedy anchors need a target count"))?;
            greedy_anchors(embedding.coords.view(), k, mask)
        }
        AnchorMethod::HullPca | AnchorMethod::HullTsne => exact_hull_anchors(embedding, mask),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorEntry {
    pub word_id: usize,
    pub token: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorsArtifact {
    pub header: ArtifactHeader,
    pub config: AnchorConfig,
    pub method: AnchorMethod,
    pub hull_dim: Option<usize>,
    pub candidates: usize,
    pub anchors: Vec<AnchorEntry>,
}

impl AnchorsArtifact {
    pub fn anchor_set(&self) -> AnchorSet {
        AnchorSet {
            word_ids: self.anchors.iter().map(|a| a.word_id).collect(),
            method: self.method,
            scores: self.anchors.iter().map(|a| a.score).collect(),
            hull_dim: self.hull_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverConfig {
    pub k: usize,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub header: ArtifactHeader,
    pub config: RecoverConfig,
    pub model: TopicModel,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    header: ArtifactHeader,
    config: RecoverConfig,
    k: usize,
    anchors: AnchorSet,
    p_w: Vec<f64>,
    diagnostics: SolverDiagnostics,
    a_file: String,
    a_sha256: String,
    c_file: String,
    c_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub header: ArtifactHeader,
    pub report: MetricsReport,
}

/// A directory of artifacts.
#[derive(Debug, Clone)]
pub struct Workspace {
    dir: PathBuf,
    allow_mixed: bool,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>, allow_mixed: bool) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Workspace { dir, allow_mixed })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Fails unless `child` was built from `parent`, or mixing is allowed.
    pub fn check_lineage(&self, child: &ArtifactHeader, parent: &ArtifactHeader) -> Result<()> {
        match child.upstream.get(&parent.stage) {
            Some(h) if *h == parent.config_hash => Ok(()),
            found => {
                let err = Error::MixedArtifacts {
                    artifact: child.stage.clone(),
                    expected: parent.config_hash.clone(),
                    found: found.cloned().unwrap_or_else(|| "nothing".into()),
                };
                if self.allow_mixed {
                    log::warn!("{err}; continuing because mixing is allowed");
                    Ok(())
                } else {
                    Err(err)
                }
            }
        }
    }

    fn fresh(&self, file: &str, expected: &ArtifactHeader) -> bool {
        match read_json::<HeaderOnly>(&self.path(file)) {
            Ok(h) => h.header == *expected,
            Err(_) => false,
        }
    }

    fn write_bin(&self, name: &str, m: &Array2<f64>) -> Result<String> {
        write_matrix(&self.path(name), m)?;
        Ok(sha256_hex(&encode_matrix(m)))
    }

    fn read_bin(&self, name: &str, sha: &str) -> Result<Array2<f64>> {
        let m = read_matrix(&self.path(name))?;
        if sha256_hex(&encode_matrix(&m)) != sha {
            return Err(Error::Format {
                what: name.to_string(),
                reason: "content hash differs from its manifest".into(),
            });
        }
        Ok(m)
    }

    /// Loads the artifact at `file` if its header matches, else computes and stores it.
    fn cached<T>(
        &self,
        file: &str,
        expected: &ArtifactHeader,
        load: impl FnOnce(&Self) -> Result<T>,
        compute: impl FnOnce(&Self) -> Result<T>,
    ) -> Result<T> {
        if self.fresh(file, expected) {
            match load(self) {
                Ok(t) => {
                    log::info!("reusing {file}");
                    return Ok(t);
                }
                Err(e) => log::warn!("cached {file} unreadable ({e}); recomputing"),
            }
        }
        compute(self)
    }

    pub fn ingest(&self, corpus_path: &Path, curation: &CurationConfig) -> Result<CorpusArtifact> {
        let run = || {
            let raw_docs = read_raw_corpus(corpus_path)?;
            let config = IngestConfig {
                corpus_sha256: sha256_hex(raw_docs.join("\n").as_bytes()),
                curation: curation.clone(),
            };
            let header = ArtifactHeader::new("corpus", &config, &[])?;
            self.cached(
                CORPUS_FILE,
                &header,
                |ws| ws.load_corpus(),
                |ws| {
                    let docs: Vec<Vec<String>> = raw_docs.iter().map(|d| tokenize(d, curation)).collect();
                    let (vocabulary, documents) = curate(&docs, curation)?;
                    let split = split_heldout(documents, curation.holdout_frac, curation.seed)?;
                    log::info!(
                        "vocabulary {} words, {} training and {} held-out documents",
                        vocabulary.len(),
                        split.train.len(),
                        split.heldout.len()
                    );
                    let art = CorpusArtifact {
                        header: header.clone(),
                        config: config.clone(),
                        vocabulary,
                        split,
                    };
                    write_json(&ws.path(CORPUS_FILE), &art)?;
                    Ok(art)
                },
            )
        };
        run().map_err(|e: Error| e.in_stage("ingest"))
    }

    pub fn load_corpus(&self) -> Result<CorpusArtifact> {
        read_json(&self.path(CORPUS_FILE))
    }

    pub fn cooccur(&self, corpus: &CorpusArtifact) -> Result<CooccurArtifact> {
        let run = || {
            let header = ArtifactHeader::new("cooccur", &(), &[&corpus.header])?;
            self.cached(
                COOCCUR_FILE,
                &header,
                |ws| ws.load_cooccur(),
                |ws| {
                    let stats = build_qhat(&corpus.split.train, corpus.vocabulary.len())?;
                    let qhat_sha256 = ws.write_bin(COOCCUR_MATRIX, &stats.qhat)?;
                    write_json(
                        &ws.path(COOCCUR_FILE),
                        &CooccurFile {
                            header: header.clone(),
                            vocab_size: stats.vocab_size(),
                            zero_rows: stats.zero_rows.clone(),
                            qhat_file: COOCCUR_MATRIX.into(),
                            qhat_sha256,
                        },
                    )?;
                    Ok(CooccurArtifact {
                        header: header.clone(),
                        stats,
                    })
                },
            )
        };
        run().map_err(|e: Error| e.in_stage("cooccur"))
    }

    pub fn load_cooccur(&self) -> Result<CooccurArtifact> {
        let f: CooccurFile = read_json(&self.path(COOCCUR_FILE))?;
        let qhat = self.read_bin(&f.qhat_file, &f.qhat_sha256)?;
        if qhat.nrows() != f.vocab_size || qhat.ncols() != f.vocab_size {
            return Err(Error::Format {
                what: COOCCUR_MATRIX.into(),
                reason: format!("expected {0}x{0}", f.vocab_size),
            });
        }
        Ok(CooccurArtifact {
            header: f.header,
            stats: CooccurrenceStats::from_qhat(qhat),
        })
    }

    pub fn embed(&self, cooc: &CooccurArtifact, config: &EmbedConfig) -> Result<EmbeddingArtifact> {
        let run = || {
            let header = ArtifactHeader::new("embedding", config, &[&cooc.header])?;
            self.cached(
                EMBEDDING_FILE,
                &header,
                |ws| ws.load_embedding(),
                |ws| {
                    let embedding = config.run(&cooc.stats.qbar)?;
                    let coords_sha256 = ws.write_bin(EMBEDDING_MATRIX, &embedding.coords)?;
                    write_json(
                        &ws.path(EMBEDDING_FILE),
                        &EmbeddingFile {
                            header: header.clone(),
                            config: config.clone(),
                            method: embedding.method,
                            seed: embedding.seed,
                            dim: embedding.dim(),
                            meta: embedding.meta.clone(),
                            coords_file: EMBEDDING_MATRIX.into(),
                            coords_sha256,
                        },
                    )?;
                    Ok(EmbeddingArtifact {
                        header: header.clone(),
                        config: config.clone(),
                        embedding,
                    })
                },
            )
        };
        run().map_err(|e: Error| e.in_stage("embed"))
    }

    pub fn load_embedding(&self) -> Result<EmbeddingArtifact> {
        let f: EmbeddingFile = read_json(&self.path(EMBEDDING_FILE))?;
        let coords = self.read_bin(&f.coords_file, &f.coords_sha256)?;
        Ok(EmbeddingArtifact {
            header: f.header,
            config: f.config,
            embedding: Embedding::new(coords, f.method, f.seed, f.meta)?,
        })
    }

    pub fn anchors(
        &self,
        corpus: &CorpusArtifact,
        cooc: &CooccurArtifact,
        embedding: &EmbeddingArtifact,
        config: &AnchorConfig,
    ) -> Result<AnchorsArtifact> {
        let run = || {
            self.check_lineage(&cooc.header, &corpus.header)?;
            self.check_lineage(&embedding.header, &cooc.header)?;
            let header = ArtifactHeader::new("anchors", config, &[&corpus.header, &cooc.header, &embedding.header])?;
            self.cached(
                ANCHORS_FILE,
                &header,
                |ws| ws.load_anchors(),
                |ws| {
                    let mask = candidates(corpus, &cooc.stats);
                    let set = select_anchors(config, &embedding.embedding, &mask)?;
                    let art = AnchorsArtifact {
                        header: header.clone(),
                        config: config.clone(),
                        method: set.method,
                        hull_dim: set.hull_dim,
                        candidates: mask.iter().filter(|m| **m).count(),
                        anchors: set
                            .word_ids
                            .iter()
                            .zip(&set.scores)
                            .map(|(&w, &score)| AnchorEntry {
                                word_id: w,
                                token: corpus.vocabulary.token(w).to_string(),
                                score,
                            })
                            .collect(),
                    };
                    write_json(&ws.path(ANCHORS_FILE), &art)?;
                    Ok(art)
                },
            )
        };
        run().map_err(|e: Error| e.in_stage("anchors"))
    }

    pub fn load_anchors(&self) -> Result<AnchorsArtifact> {
        read_json(&self.path(ANCHORS_FILE))
    }

    pub fn recover(
        &self,
        cooc: &CooccurArtifact,
        anchors: &AnchorsArtifact,
        config: &RecoverConfig,
    ) -> Result<ModelArtifact> {
        let run = || {
            self.check_lineage(&anchors.header, &cooc.header)?;
            let header = ArtifactHeader::new("model", config, &[&cooc.header, &anchors.header])?;
            self.cached(
                MODEL_FILE,
                &header,
                |ws| ws.load_model(),
                |ws| {
                    let model = recover_model(&cooc.stats, &anchors.anchor_set(), config.k, &config.solver)?;
                    let unconverged = model.diagnostics.unconverged();
                    if unconverged > 0 {
                        log::warn!("{unconverged} words did not reach the solver tolerance");
                    }
                    let a_sha256 = ws.write_bin(MODEL_A_MATRIX, &model.a)?;
                    let c_sha256 = ws.write_bin(MODEL_C_MATRIX, &model.c)?;
                    write_json(
                        &ws.path(MODEL_FILE),
                        &ModelFile {
                            header: header.clone(),
                            config: config.clone(),
                            k: model.num_topics(),
                            anchors: model.anchors.clone(),
                            p_w: model.p_w.clone(),
                            diagnostics: model.diagnostics.clone(),
                            a_file: MODEL_A_MATRIX.into(),
                            a_sha256,
                            c_file: MODEL_C_MATRIX.into(),
                            c_sha256,
                        },
                    )?;
                    Ok(ModelArtifact {
                        header: header.clone(),
                        config: config.clone(),
                        model,
                    })
                },
            )
        };
        run().map_err(|e: Error| e.in_stage("recover"))
    }

    pub fn load_model(&self) -> Result<ModelArtifact> {
        let f: ModelFile = read_json(&self.path(MODEL_FILE))?;
        let a = self.read_bin(&f.a_file, &f.a_sha256)?;
        let c = self.read_bin(&f.c_file, &f.c_sha256)?;
        Ok(ModelArtifact {
            header: f.header,
            config: f.config,
            model: TopicModel {
                a,
                c,
                anchors: f.anchors,
                p_w: f.p_w,
                diagnostics: f.diagnostics,
            },
        })
    }

    pub fn metrics(
        &self,
        corpus: &CorpusArtifact,
        cooc: &CooccurArtifact,
        model: &ModelArtifact,
        config: &MetricsConfig,
    ) -> Result<MetricsArtifact> {
        let run = || {
            self.check_lineage(&cooc.header, &corpus.header)?;
            self.check_lineage(&model.header, &cooc.header)?;
            let header = ArtifactHeader::new("metrics", config, &[&corpus.header, &cooc.header, &model.header])?;
            self.cached(
                METRICS_FILE,
                &header,
                |ws| read_json(&ws.path(METRICS_FILE)),
                |ws| {
                    let report = evaluate(
                        cooc.stats.qbar.view(),
                        &model.model,
                        &corpus.split.train,
                        &corpus.split.heldout,
                        config,
                    )?;
                    let art = MetricsArtifact {
                        header: header.clone(),
                        report,
                    };
                    write_json(&ws.path(METRICS_FILE), &art)?;
                    Ok(art)
                },
            )
        };
        run().map_err(|e: Error| e.in_stage("metrics"))
    }
}
