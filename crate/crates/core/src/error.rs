use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no word survived vocabulary curation")]
    EmptyVocabulary,

    #[error("document {index} has {length} tokens; co-occurrence needs at least 2")]
    DegenerateDocument { index: usize, length: usize },

    #[error("eigensolver did not reach tolerance {tol:e} within {iterations} iterations")]
    ConvergenceFailure { iterations: usize, tol: f64 },

    #[error("perplexity search for point {point} could not bracket target entropy {target:.6} bits")]
    SearchFailure { point: usize, target: f64 },

    #[error("non-finite coordinate at t-SNE iteration {iteration} (last KL {last_kl:.6})")]
    NonFiniteUpdate { iteration: usize, last_kl: f64 },

    #[error("residual norms fell below {threshold:e} after {found} of {requested} anchors")]
    RankDeficiency {
        found: usize,
        requested: usize,
        threshold: f64,
    },

    #[error("candidate points are affinely dependent in {dim} dimensions")]
    DegenerateGeometry { dim: usize },

    #[error("requested {requested} topics but only {available} anchors are available")]
    KTooLarge { requested: usize, available: usize },

    #[error("topic {topic} receives no probability mass")]
    EmptyTopic { topic: usize },

    #[error("normalized entropy is undefined for a single topic")]
    UndefinedForK1,

    #[error("unsupported embedding dimension {dim} (expected 2 or 3)")]
    UnsupportedDim { dim: usize },

    #[error("artifact {artifact} was produced from {found}, expected {expected}")]
    MixedArtifacts {
        artifact: String,
        expected: String,
        found: String,
    },

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },

    #[error("convex hull construction failed: {0}")]
    Hull(&'static str),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
