use thiserror::Error;

/// Errors produced by the auction toolkit.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),

    #[error("unknown bidder id {0}")]
    UnknownBidder(u64),

    /// No feasible allocation of the requested size exists.
    #[error("no feasible allocation with {k} copies")]
    NoAllocation { k: usize },

    /// An exhaustive search was asked to exceed its size budget.
    #[error("budget exceeded: {what} is {actual}, limit {limit}")]
    Budget {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// An analysis produced nothing to aggregate over (e.g. no equilibria).
    #[error("empty result: {0}")]
    EmptyResult(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
