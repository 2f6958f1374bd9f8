//! Corpus-to-model toolkit for hierarchical word classification and
//! class-based statistical language modelling.
//!
//! The crate builds binary word hierarchies ("structural tags") by top-down
//! maximisation of average class mutual information over bigram statistics,
//! then trains a family of interpolated n-gram language models that exploit
//! the hierarchy. Models are compared by test-set perplexity.
//!
//! The pipeline, end to end:
//!
//! 1. [`corpus`] — tokenize text, build a frequency-ranked vocabulary,
//!    count n-grams, split a token stream 60/30/10.
//! 2. [`cluster`] — assign each word a 16-bit structural tag whose most
//!    significant bits encode progressively finer class membership.
//! 3. [`lm`] — train maximum-likelihood, interpolated-trigram,
//!    weighted-average and multi-level class models.
//! 4. [`eval`] — measure perplexity, rank alternative sentences, score
//!    cluster quality against a gold lexicon.
//!
//! Each step is also exposed through the `structag` binary (see [`cli`]),
//! and `examples/` contains one runnable program per capability.

pub mod cli;
pub mod cluster;
pub mod corpus;
pub mod eval;
pub mod lm;

use std::path::PathBuf;

/// Unified error type for the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("corpus too small: {0} tokens (need at least 10)")]
    CorpusTooSmall(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid depth {0}: structural tags are 16 bits wide")]
    InvalidDepth(u32),

    #[error("level {level} out of order: next optimizable level is {expected}")]
    OutOfOrderLevel { level: u8, expected: u8 },

    #[error(
        "class with prefix {prefix:#06x} at depth {depth} holds {size} words, \
         exceeding its capacity of {capacity}"
    )]
    ClassOverflow {
        prefix: u16,
        depth: u8,
        size: usize,
        capacity: usize,
    },

    #[error("gold lexicon covers only {covered} of {total} vocabulary words")]
    InsufficientGold { covered: usize, total: usize },

    #[error("zero probability at test position {position} (word `{word}`)")]
    EvaluationFailure { position: usize, word: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
