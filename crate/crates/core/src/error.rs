use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed graph: {0}")]
    Graph(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected} entries, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("malformed augmentation: {0}")]
    MalformedWalk(String),

    #[error("invalid augmentation: {0}")]
    InvalidAugmentation(String),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("non-convergence: iteration cap {cap} exceeded with {active} active edges")]
    NonConvergence { cap: usize, active: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not actually {alpha}-tight: {detail}")]
    NotTight { alpha: String, detail: String },

    #[error(
        "enumeration infeasible: grid of {grid} steps per unit, {count} sequences exceed the limit {limit}"
    )]
    EnumerationInfeasible { grid: u64, count: u128, limit: u128 },

    #[error("oracle refuses m = {m} edges (cap {cap})")]
    OracleCap { m: usize, cap: usize },

    #[error("memory violation: peak {peak} words exceeds budget {budget}")]
    MemoryViolation { peak: usize, budget: usize },

    #[error("hash point {point} outside domain 0..{domain}")]
    HashDomain { point: u64, domain: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
