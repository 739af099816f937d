use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
///
/// Messages name the violated precondition so that the CLI can surface them
/// verbatim.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("capacity exceeded: requested {requested}, configured cap is {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("{what} = {value} is out of range (maximum {max})")]
    OutOfRange {
        what: &'static str,
        value: u64,
        max: u64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("side condition k > 2·log2(q) violated for q = {q}, k = {k}")]
    SideCondition { q: u32, k: u32 },

    #[error("certificate is vacuous: q² ≥ 2M for q = {q}")]
    Vacuous { q: u32 },

    #[error("search window exhausted at q = {q_max}; build a larger Bell table")]
    WindowExhausted { q_max: u32 },

    #[error("resource cap exceeded: {what} needs {requested}, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("malformed seed: expected {expected} coefficients, got {got}")]
    MalformedSeed { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("cache error: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
