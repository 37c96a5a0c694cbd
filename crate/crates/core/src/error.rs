use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The distributions handed to the sampler do not form a valid family.
    #[error("configuration error at index {index}: {message}")]
    Config { index: usize, message: String },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Lower and upper bounding processes crossed.
    #[error(
        "sandwich violated at time {time}, component {component}: lower {lower} > upper {upper}"
    )]
    Sandwich {
        time: i64,
        component: usize,
        lower: f64,
        upper: f64,
    },

    #[error("no coalescence within {max_n} steps back (last gap {last_gap:e})")]
    NonCoalescence { max_n: u64, last_gap: f64 },

    #[error("rejection oracle infeasible: {accepted} acceptances in {proposals} proposals")]
    OracleInfeasible { proposals: u64, accepted: u64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate evidence: {0}")]
    DegenerateEvidence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
