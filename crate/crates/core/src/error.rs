use crate::model::Support;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    /// The candidate submatrix does not have full column rank; the candidate
    /// is unidentifiable and callers are expected to skip it.
    #[error("rank-deficient candidate {support:?}: numerical rank {rank} < cardinality {cardinality}")]
    RankDeficient {
        support: Support,
        cardinality: usize,
        rank: usize,
    },

    /// EFIC's data-dependent penalty is meaningless at zero residual.
    #[error("degenerate residual: data-dependent penalty undefined when the residual vanishes")]
    DegenerateResidual,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("candidate path is empty")]
    EmptyPath,

    #[error("no path entry of cardinality {0}")]
    NoSuchCardinality(usize),

    #[error("exhaustive enumeration too large: C({p}, {k_max}) exceeds {limit}")]
    TooLarge { p: usize, k_max: usize, limit: u64 },

    #[error("all candidates failed: {0}")]
    AllCandidatesFailed(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
