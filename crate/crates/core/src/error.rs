use core::fmt;

use crate::sde::ChainLabel;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A chain left the finite region or crossed the divergence threshold.
    Divergence { step: u64, chain: Option<ChainLabel> },
    /// Vector or data dimensions disagree.
    Dimension { expected: usize, found: usize },
    /// Batch size not admissible for the dataset / replacement mode.
    Range { s: usize, m: usize },
    /// Batch cannot be split into two equal halves.
    OddBatch(usize),
    /// Enumeration oracle asked for more data points than it can afford.
    Complexity { m: usize, max: usize },
    /// Per-level variance needs at least two samples.
    TooFewSamples { n: u64 },
    /// Allocation could not be computed (non-finite or negative variance).
    Allocation(&'static str),
    /// Least-squares rate fit is degenerate.
    Fit(&'static str),
    /// Adaptive driver would need more data than the dataset holds.
    LevelCap { level: u32, batch: usize, m: usize },
    /// Invalid configuration value.
    Config(&'static str),
    /// Dataset content is invalid.
    Data(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Divergence { step, chain: Some(c) } => {
                write!(f, "chain {c:?} diverged at step {step}")
            }
            Error::Divergence { step, chain: None } => write!(f, "chain diverged at step {step}"),
            Error::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Range { s, m } => {
                write!(f, "batch size {s} exceeds dataset size {m} without replacement")
            }
            Error::OddBatch(n) => write!(f, "cannot split a batch of odd size {n}"),
            Error::Complexity { m, max } => {
                write!(f, "enumeration over {m} data points exceeds the cap of {max}")
            }
            Error::TooFewSamples { n } => write!(f, "variance needs at least 2 samples, have {n}"),
            Error::Allocation(msg) => write!(f, "allocation failed: {msg}"),
            Error::Fit(msg) => write!(f, "rate fit failed: {msg}"),
            Error::LevelCap { level, batch, m } => write!(
                f,
                "level {level} needs batches of {batch} points but the dataset has {m}"
            ),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Data(msg) => write!(f, "invalid data: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
