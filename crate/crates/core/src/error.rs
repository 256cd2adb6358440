use thiserror::Error;

/// Errors produced by the library. The CLI maps these onto exit codes:
/// usage errors are caught by clap, `Ingestion`/`Io`/`Parse` map to 3,
/// numerical degeneracies map to 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing genotype at snp {snp}, individual {individual} under reject policy")]
    MissingGenotype { snp: usize, individual: usize },

    #[error("invalid genotype value {value} at snp {snp}, individual {individual}")]
    InvalidGenotype {
        snp: usize,
        individual: usize,
        value: u8,
    },

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invariant violated for {type_name}: {detail}")]
    InvariantViolation {
        type_name: &'static str,
        detail: String,
    },

    #[error("asymmetric input: max|A - A^T| = {max_asym:.3e} exceeds {tol:.1e}")]
    AsymmetricInput { max_asym: f64, tol: f64 },

    #[error("rank deficiency: numerical rank {found}, required {required}")]
    RankDeficient { found: usize, required: usize },

    #[error("k' = {k_prime} out of range [{min}, {max}]")]
    KPrimeOutOfRange {
        k_prime: usize,
        min: usize,
        max: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("bad .bed header: {0}")]
    BedHeader(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
