use thiserror::Error;

/// Errors raised while building or validating problems, sets and configurations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("missing oracle: {0}")]
    MissingOracle(&'static str),

    #[error("oracle `{0}` produced a non-finite value")]
    NonFiniteOutput(&'static str),

    #[error("invalid configuration: `{field}` = {value} ({requirement})")]
    InvalidConfig {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("no default multiplier set for this kind of set C; supply Y explicitly")]
    UnsupportedSetForDefaultY,

    #[error("grid search over {0} dimensions is not supported (at most 3)")]
    DimensionTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// A user oracle returned NaN or an infinity during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("oracle `{0}` returned a non-finite value")]
pub struct OracleFailure(pub &'static str);
