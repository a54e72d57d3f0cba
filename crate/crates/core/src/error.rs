use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CipherError {
    #[error("{cipher} supports 1..={max} rounds, got {rounds}")]
    Rounds {
        cipher: &'static str,
        rounds: usize,
        max: usize,
    },
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("differential class set needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("differential {0:#018x} is zero or duplicated")]
    BadDelta(u64),
    #[error("shift by {shift} nibbles turns {base:#018x} into zero")]
    ShiftToZero { base: u64, shift: i32 },
    #[error("validation fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("pair count must be at least 1")]
    NoPairs,
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error("dataset parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error("model file stores {stored}-byte scalars, expected {expected}")]
    ScalarWidth { stored: u8, expected: u8 },
    #[error("model file truncated")]
    Truncated,
    #[error("model checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid architecture: {0}")]
    Arch(String),
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("empty data set")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("S-box is not a bijection on 4-bit values")]
    NotBijective,
    #[error("histogram has {total} samples, need at least {needed} for {buckets} buckets")]
    UnderSampled {
        total: u64,
        needed: u64,
        buckets: usize,
    },
    #[error("expected distribution does not match histogram width")]
    Shape,
    #[error("sample count must be at least 1 and delta nonzero")]
    Input,
    #[error(transparent)]
    Cipher(#[from] CipherError),
}

#[derive(Debug, Error)]
pub enum DistinguishError {
    #[error("query pair count must be at least 1")]
    NoQueries,
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("plot needs rows covering at least two rounds")]
    PlotCoverage,
    #[error("no result rows")]
    NoRows,
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
